"""Command-line entry point: one `wsd` binary, one subcommand per stage.

Every subcommand writes a `<out>.manifest.json` next to its output with the
resolved configuration, seeds and tool version, sufficient to re-run the
stage exactly; rerunning with identical flags and inputs produces
byte-identical primary outputs.
"""

import argparse
import json
import sys
import time

from . import __version__, backend, corpus, embeddings, evaluation, lstm


def _manifest(args, outputs, inputs, started, extra=None):
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",) and not callable(v)}
    doc = {
        "tool": "wsd",
        "version": __version__,
        "backend": backend.BACKEND,
        "subcommand": args.subcommand,
        "config": cfg,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "duration_s": round(time.monotonic() - started, 3),
    }
    if extra:
        doc.update(extra)
    path = str(outputs[0]) + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def _filter_stream(src, writer, tokenize):
    kept = total = 0
    for line in src:
        total += 1
        cleaned = corpus.filter_georgian_line(line)
        if cleaned is None:
            continue
        kept += 1
        if tokenize:
            for sent in corpus.segment_and_tokenize(cleaned):
                writer.write(" ".join(sent) + "\n")
        else:
            writer.write(cleaned + "\n")
    return kept, total


def cmd_filter(args):
    started = time.monotonic()
    writer = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8")
    kept = total = 0
    try:
        if args.inputs == ["-"]:
            kept, total = _filter_stream(sys.stdin, writer, args.tokenize)
        else:
            for path in args.inputs:
                with open(path, encoding="utf-8") as src:
                    k, t = _filter_stream(src, writer, args.tokenize)
                kept += k
                total += t
    finally:
        if writer is not sys.stdout:
            writer.close()
    print("filter: kept %d of %d lines" % (kept, total), file=sys.stderr)
    if args.out != "-":
        _manifest(args, [args.out], args.inputs, started, {"lines_in": total, "lines_kept": kept})
    return 0


def cmd_extract(args):
    started = time.monotonic()
    spec = corpus.load_homonym_spec(args.spec)
    count = corpus.run_extraction_pipeline(args.inputs, spec, args.out)
    print("extract: wrote %d windows" % count, file=sys.stderr)
    _manifest(args, [args.out], list(args.inputs) + [args.spec], started, {"windows": count})
    return 0


def cmd_train_embeddings(args):
    started = time.monotonic()
    config = embeddings.EmbeddingConfig(
        dimension=args.dim, window=args.window, min_count=args.min_count,
        epochs=args.epochs, negative_samples=args.negative,
        learning_rate=args.lr, table_size=args.table_size, seed=args.seed)
    matrix = embeddings.train_embeddings(
        args.corpus, config,
        progress=lambda e, loss: print("epoch %d: mean pair loss %.6f" % (e, loss), file=sys.stderr))
    embeddings.save_embeddings(matrix, args.out)
    print("embeddings: %d words x %d dims" % (len(matrix.vocab), matrix.dimension), file=sys.stderr)
    _manifest(args, [args.out], [args.corpus], started, {"vocabulary": len(matrix.vocab)})
    return 0


def _load_split(args, spec):
    examples = corpus.drop_other(corpus.load_labeled_dataset(args.data, spec))
    split = corpus.SplitSpec(seed=args.seed, test_fraction=args.test_frac,
                             validation_fraction_of_train=args.val_frac)
    return corpus.stratified_split(examples, split, n_classes=spec.n_senses)


def _train_config(args, seed=None):
    return lstm.ClassifierTrainConfig(
        max_epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr,
        early_stopping_patience=args.patience if args.patience > 0 else None,
        seed=args.seed if seed is None else seed)


def cmd_train(args):
    started = time.monotonic()
    spec = corpus.load_homonym_spec(args.spec)
    matrix = embeddings.load_embeddings(args.embeddings)
    train_set, val_set, test_set = _load_split(args, spec)
    config = _train_config(args)
    model, history = lstm.train(train_set, val_set, matrix, config,
                                n_classes=spec.n_senses, log=lambda line: print(line, file=sys.stderr))
    lstm.save_model(model, args.out)
    best = history.best_epoch
    if history.val_loss:
        print("train: best epoch %d (val_loss=%.6f val_acc=%.4f), %d test examples held out"
              % (best, history.val_loss[best - 1], history.val_accuracy[best - 1], len(test_set)),
              file=sys.stderr)
    else:
        print("train: ran %d epochs, %d test examples held out" % (best, len(test_set)),
              file=sys.stderr)
    _manifest(args, [args.out], [args.data, args.embeddings, args.spec], started, {
        "train_size": len(train_set), "val_size": len(val_set), "test_size": len(test_set),
        "best_epoch": best, "stopped_early": history.stopped_early,
    })
    return 0


def cmd_evaluate(args):
    started = time.monotonic()
    spec = corpus.load_homonym_spec(args.spec)
    matrix = embeddings.load_embeddings(args.embeddings)
    train_set, val_set, test_set = _load_split(args, spec)
    if args.runs <= 1:
        if not args.model:
            print("evaluate: --model is required with --runs 1", file=sys.stderr)
            return 1
        model = lstm.load_model(args.model)
        metrics = evaluation.evaluate(lambda w: lstm.predict(model, w, matrix)[0], test_set)
        evaluation.write_metrics(metrics, args.out, model_name="lstm", test_size=len(test_set))
        print("evaluate: accuracy %.6f on %d examples" % (metrics.accuracy, metrics.n_examples),
              file=sys.stderr)
        inputs = [args.model, args.data, args.embeddings, args.spec]
    else:
        def run_accuracy(seed):
            config = _train_config(args, seed=seed)
            model, _ = lstm.train(train_set, val_set, matrix, config, n_classes=spec.n_senses)
            return evaluation.evaluate(lambda w: lstm.predict(model, w, matrix)[0], test_set).accuracy

        summary = evaluation.repeat_training(args.runs, args.seed, run_accuracy)
        evaluation.write_metrics(summary, args.out, model_name="lstm", test_size=len(test_set))
        print("evaluate: %d runs, mean accuracy %.6f (min %.6f, max %.6f)"
              % (summary.runs, summary.mean_accuracy, summary.min_accuracy, summary.max_accuracy),
              file=sys.stderr)
        inputs = [args.data, args.embeddings, args.spec]
    _manifest(args, [args.out], inputs, started, {"test_size": len(test_set)})
    return 0


def cmd_ablate(args):
    started = time.monotonic()
    spec = corpus.load_homonym_spec(args.spec)
    matrix = embeddings.load_embeddings(args.embeddings)
    try:
        fractions = [float(f) for f in args.fractions.split(",") if f]
    except ValueError:
        print("ablate: cannot parse --fractions %r" % args.fractions, file=sys.stderr)
        return 1
    train_set, val_set, test_set = _load_split(args, spec)
    config = _train_config(args)
    curve = evaluation.ablate_training_size(
        fractions, args.epochs, train_set + val_set, test_set, matrix, config,
        subsample_seed=args.seed, log=lambda line: print(line, file=sys.stderr))
    evaluation.write_metrics(curve, args.out, model_name="lstm", test_size=len(test_set))
    _manifest(args, [args.out], [args.data, args.embeddings, args.spec], started,
              {"test_size": len(test_set)})
    return 0


def cmd_predict(args):
    spec = corpus.load_homonym_spec(args.spec)
    matrix = embeddings.load_embeddings(args.embeddings)
    model = lstm.load_model(args.model)
    text = args.sentence if args.sentence is not None else sys.stdin.read()
    windows = []
    for sentence in corpus.segment_and_tokenize(text.strip()):
        windows.extend(corpus.extract_windows(sentence, spec))
    if not windows:
        print("predict: no occurrence of %r (or its forms) in the input" % spec.lemma,
              file=sys.stderr)
        return 1
    for window in windows:
        label, probs = lstm.predict(model, window, matrix)
        probs_str = " ".join("%.6f" % p for p in probs)
        print("%d\t%s\t%s" % (label, spec.gloss(label), probs_str))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wsd", description="Georgian homonym sense disambiguation pipeline")
    parser.add_argument("--version", action="version", version="wsd " + __version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=fn)
        return p

    p = add("filter", cmd_filter, "keep only all-Georgian corpus lines")
    p.add_argument("inputs", nargs="+", help="input text files, or - for stdin")
    p.add_argument("--out", required=True, help="output path, or - for stdout")
    p.add_argument("--tokenize", action="store_true",
                   help="emit tokenized sentences (one per line) instead of raw lines")

    p = add("extract", cmd_extract, "extract homonym-centered windows from raw corpus")
    p.add_argument("inputs", nargs="+", help="raw corpus files")
    p.add_argument("--spec", required=True, help="homonym spec config file")
    p.add_argument("--out", required=True, help="output dataset file")

    p = add("train-embeddings", cmd_train_embeddings, "train skip-gram word vectors")
    p.add_argument("corpus", help="tokenized corpus, one sentence per line")
    p.add_argument("--out", required=True, help="output embedding file")
    p.add_argument("--dim", type=int, default=128, help="vector dimensionality")
    p.add_argument("--window", type=int, default=10, help="maximum context window")
    p.add_argument("--min-count", type=int, default=10, help="minimum word frequency")
    p.add_argument("--epochs", type=int, default=20, help="training epochs")
    p.add_argument("--negative", type=int, default=5, help="negative samples per pair")
    p.add_argument("--lr", type=float, default=0.025, help="initial learning rate")
    p.add_argument("--table-size", type=int, default=10_000_000,
                   help="negative-sampling table entries")
    p.add_argument("--seed", type=int, default=42, help="random seed")

    p = add("train", cmd_train, "train the LSTM sense classifier")
    p.add_argument("data", help="labeled dataset file")
    p.add_argument("--embeddings", required=True, help="embedding file")
    p.add_argument("--spec", required=True, help="homonym spec config file")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--epochs", type=int, default=40, help="maximum training epochs")
    p.add_argument("--batch-size", type=int, default=16, help="mini-batch size")
    p.add_argument("--lr", type=float, default=0.001, help="learning rate")
    p.add_argument("--patience", type=int, default=5,
                   help="early-stopping patience in epochs (0 disables)")
    p.add_argument("--test-frac", type=float, default=0.2, help="held-out test fraction")
    p.add_argument("--val-frac", type=float, default=0.2,
                   help="validation fraction of the training split")
    p.add_argument("--seed", type=int, default=42, help="random seed")

    p = add("evaluate", cmd_evaluate, "evaluate a model, or rerun training N times")
    p.add_argument("data", help="labeled dataset file")
    p.add_argument("--model", default=None, help="model file (required with --runs 1)")
    p.add_argument("--embeddings", required=True, help="embedding file")
    p.add_argument("--spec", required=True, help="homonym spec config file")
    p.add_argument("--out", required=True, help="output metrics JSON")
    p.add_argument("--runs", type=int, default=1, help="training repetitions")
    p.add_argument("--epochs", type=int, default=40, help="maximum training epochs")
    p.add_argument("--batch-size", type=int, default=16, help="mini-batch size")
    p.add_argument("--lr", type=float, default=0.001, help="learning rate")
    p.add_argument("--patience", type=int, default=5,
                   help="early-stopping patience in epochs (0 disables)")
    p.add_argument("--test-frac", type=float, default=0.2, help="held-out test fraction")
    p.add_argument("--val-frac", type=float, default=0.2,
                   help="validation fraction of the training split")
    p.add_argument("--seed", type=int, default=42, help="split seed and base training seed")

    p = add("ablate", cmd_ablate, "accuracy vs training-set size at a fixed epoch budget")
    p.add_argument("data", help="labeled dataset file")
    p.add_argument("--embeddings", required=True, help="embedding file")
    p.add_argument("--spec", required=True, help="homonym spec config file")
    p.add_argument("--out", required=True, help="output metrics JSON")
    p.add_argument("--fractions", default="0.1,0.25,0.5,1.0",
                   help="comma-separated training fractions, strictly increasing")
    p.add_argument("--epochs", type=int, default=10, help="epochs per ablation point")
    p.add_argument("--batch-size", type=int, default=16, help="mini-batch size")
    p.add_argument("--lr", type=float, default=0.001, help="learning rate")
    p.add_argument("--patience", type=int, default=0, help="ignored: ablation disables early stopping")
    p.add_argument("--test-frac", type=float, default=0.2, help="held-out test fraction")
    p.add_argument("--val-frac", type=float, default=0.2,
                   help="validation fraction (merged back into ablation training pools)")
    p.add_argument("--seed", type=int, default=42, help="split and subsampling seed")

    p = add("predict", cmd_predict, "disambiguate the homonym in a sentence")
    p.add_argument("sentence", nargs="?", default=None, help="input sentence (stdin if omitted)")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--embeddings", required=True, help="embedding file")
    p.add_argument("--spec", required=True, help="homonym spec config file")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, FloatingPointError) as exc:
        print("wsd %s: error: %s" % (args.subcommand, exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
