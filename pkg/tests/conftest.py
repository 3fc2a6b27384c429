import pytest

from georgian_wsd.corpus import HomonymSpec

HOMONYM = "ბარი"  # ბარი
FORM_IN = "ბარში"  # ბარში
SHOVEL_SYN = "ნიჩაბი"  # ნიჩაბი
LOWLAND_SYN = "დაბლობი"  # დაბლობი
CAFE_SYN = "კაფე"  # კაფე


@pytest.fixture
def homonym_spec():
    return HomonymSpec(
        lemma=HOMONYM,
        surface_forms=(HOMONYM, FORM_IN),
        sense_inventory=(
            (0, "shovel", SHOVEL_SYN),
            (1, "lowland", LOWLAND_SYN),
            (2, "cafe", CAFE_SYN),
        ),
    )


@pytest.fixture
def spec_config_text():
    return "\n".join(
        [
            "# example homonym config",
            "lemma %s" % HOMONYM,
            "form %s" % HOMONYM,
            "form %s" % FORM_IN,
            "sense 0 shovel %s" % SHOVEL_SYN,
            "sense 1 lowland %s" % LOWLAND_SYN,
            "sense 2 cafe %s" % CAFE_SYN,
            "",
        ]
    )


@pytest.fixture
def spec_file(tmp_path, spec_config_text):
    path = tmp_path / "bari.config"
    path.write_text(spec_config_text, encoding="utf-8")
    return path
