"""Command-line interface: rendering, statistics, masking, training, analysis.

Conventions shared by every subcommand:

* exit codes: 0 success, 1 usage errors, 2 I/O failures, 3 precondition
  violations (well-formed flags carrying values the pipeline rejects);
* data goes to files (or stdout for single scalars), diagnostics to stderr,
  so runs compose in shell pipelines;
* corpora are UTF-8 text files, one sequence per line, LF endings (CRLF
  tolerated and normalized);
* outputs are written atomically (temp file + rename), and a manifest JSON
  describing the run (flags, seeds, inputs, outputs, version, duration) is
  written beside the first output, default ``<out>.manifest.json``;
* report subcommands render a PNG figure next to each delimited output
  unless ``--no-fig`` is given;
* ``--seed`` defaults to the ``PATCHTEXT_SEED`` environment variable, then 0;
* subcommands taking ``--workers`` shard rendering across processes with an
  order-preserving merge, so results are identical at any worker count.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import multiprocessing
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    ScoredPair,
    SentenceInfo,
    SimilarityDistribution,
    WicPair,
    WordOccurrence,
    build_dump,
    frequency_bucket_distributions,
    load_dump,
    save_dump,
    self_similarity,
    sentence_info_from_sequence,
    spearman_rho,
    sts_layer_curve,
    wic_distributions,
)
from .formats import atomic_write_text, write_patch_dump, write_pgm
from .masking import MaskConfig, sample_span_mask
from .raster import load_builtin_font
from .render import PatchSequence, RenderConfig, Strategy, render
from .stats import (
    PatchAccumulator,
    frequency_buckets,
    ingest,
    length_histogram,
    top_k,
    unique_curve,
    word_frequencies,
)

STRATEGY_CHOICES = tuple(s.value for s in Strategy)
WIC_LABEL_ORDER = ("similar", "different", "random")
FREQ_LABEL_ORDER = ("high-high", "low-low", "high-low")


# --------------------------------------------------------------------------
# Shared plumbing
# --------------------------------------------------------------------------

def _diag(message: str) -> None:
    print(message, file=sys.stderr)


def read_corpus(path) -> list[str]:
    """One sequence per line; handles LF, CRLF, and lone-CR endings."""
    return Path(path).read_text(encoding="utf-8").splitlines()


def resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("PATCHTEXT_SEED", "").strip()
    if not env:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"PATCHTEXT_SEED must be an integer, got {env!r}") from None


def _render_config(args) -> RenderConfig:
    return RenderConfig(strategy=Strategy(args.strategy),
                        max_patches=args.max_patches,
                        min_whitespace=args.min_whitespace)


_WORKER_STATE: dict = {}


def _pool_init(payload: tuple[str, int, int]) -> None:
    strategy, max_patches, min_whitespace = payload
    _WORKER_STATE["cfg"] = RenderConfig(strategy=Strategy(strategy),
                                        max_patches=max_patches,
                                        min_whitespace=min_whitespace)
    _WORKER_STATE["font"] = load_builtin_font()


def _render_worker(line: str) -> PatchSequence:
    return render(line, _WORKER_STATE["cfg"], _WORKER_STATE["font"])


def _sequence_stream(lines: list[str], cfg: RenderConfig, workers: int):
    """Rendered sequences in corpus order, optionally from a process pool."""
    if workers < 1:
        raise ValueError("--workers must be >= 1")
    if workers == 1:
        font = load_builtin_font()
        for line in lines:
            yield render(line, cfg, font)
        return
    payload = (cfg.strategy.value, cfg.max_patches, cfg.min_whitespace)
    with multiprocessing.Pool(workers, initializer=_pool_init,
                              initargs=(payload,)) as pool:
        yield from pool.imap(_render_worker, lines, chunksize=64)


def write_csv(path, header: list[str], rows, metadata: str | None = None) -> None:
    buf = io.StringIO()
    if metadata is not None:
        buf.write(f"# {metadata}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _fig_path(out) -> Path:
    return Path(out).with_suffix(".png")


def _summary_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + "_summary" + (out.suffix or ".csv"))


def _write_manifest(args, inputs: list, outputs: list, seeds: dict) -> None:
    path = args.manifest
    if path is None:
        if not outputs:
            return
        path = Path(str(outputs[0]) + ".manifest.json")
    config = {}
    for key, value in vars(args).items():
        if key in ("func", "manifest") or key.startswith("_"):
            continue
        config[key] = str(value) if isinstance(value, Path) else value
    blob = {
        "subcommand": args._subcommand,
        "config": config,
        "seeds": seeds,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "toolkit_version": __version__,
        "duration_seconds": round(time.monotonic() - args._started, 6),
    }
    atomic_write_text(path, json.dumps(blob, indent=2, sort_keys=True) + "\n")


def _distribution_rows(per_layer: dict[int, dict[str, SimilarityDistribution]],
                       label_order: tuple[str, ...]):
    """Raw (label, layer, value) rows plus summary rows, in a fixed order."""
    raw, summary = [], []
    for label in label_order:
        for layer in sorted(per_layer):
            dist = per_layer[layer][label]
            raw.extend((label, layer, str(v)) for v in dist.values)
            s = dist.summary()
            summary.append((label, layer, s["count"], str(s["median"]),
                            str(s["q1"]), str(s["q3"])))
    return raw, summary


def _write_distribution_report(args, per_layer, label_order, metadata: str,
                               inputs: list, seeds: dict) -> int:
    raw, summary = _distribution_rows(per_layer, label_order)
    write_csv(args.out, ["label", "layer", "value"], raw, metadata=metadata)
    write_csv(_summary_path(args.out),
              ["label", "layer", "count", "median", "q1", "q3"],
              summary, metadata=metadata)
    outputs = [args.out, _summary_path(args.out)]
    if not args.no_fig:
        from .plots import plot_distributions

        dists = [per_layer[layer][label] for label in label_order
                 for layer in sorted(per_layer)]
        plot_distributions(dists, _fig_path(args.out))
        outputs.append(_fig_path(args.out))
    _write_manifest(args, inputs, outputs, seeds)
    return 0


# --------------------------------------------------------------------------
# render
# --------------------------------------------------------------------------

def cmd_render(args) -> int:
    lines = read_corpus(args.input)
    cfg = _render_config(args)
    sequences = list(_sequence_stream(lines, cfg, args.workers))
    truncated = sum(1 for s in sequences if s.truncated)
    overflow = sum(s.overflow_events for s in sequences)
    if truncated:
        _diag(f"{truncated} of {len(sequences)} sequences truncated at {cfg.max_patches} patches")
    if overflow:
        _diag(f"{overflow} bigram cells wider than {cfg.patch_size}px were clipped")
    write_patch_dump(args.out, sequences, cfg, corpus_path=str(args.input))
    _diag(f"wrote {len(sequences)} sequences to {args.out}")
    _write_manifest(args, [args.input], [args.out, str(args.out) + ".json"], {})
    return 0


# --------------------------------------------------------------------------
# stats
# --------------------------------------------------------------------------

def cmd_stats_curve(args) -> int:
    lines = read_corpus(args.input)
    cfg = _render_config(args)
    curve = unique_curve((), cfg, list(args.checkpoints),
                         sequences=_sequence_stream(lines, cfg, args.workers))
    if curve.exhausted_at is not None:
        _diag(f"corpus exhausted after {curve.exhausted_at} sequences "
              f"(requested up to {args.checkpoints[-1]})")
    rows = [(p.sequences, p.unique_patches, p.total_patches) for p in curve.points]
    write_csv(args.out, ["sequences", "unique_patches", "total_patches"], rows)
    outputs = [args.out]
    if not args.no_fig:
        from .plots import plot_unique_curves

        plot_unique_curves({args.strategy: curve}, _fig_path(args.out))
        outputs.append(_fig_path(args.out))
    _write_manifest(args, [args.input], outputs, {})
    return 0


def cmd_stats_topk(args) -> int:
    lines = read_corpus(args.input)
    cfg = _render_config(args)
    acc = PatchAccumulator(patch_size=cfg.patch_size)
    for seq in _sequence_stream(lines, cfg, args.workers):
        ingest(acc, seq)
    ranked = top_k(acc, args.k)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, grid, outputs = [], [], []
    for rank, (key, count) in enumerate(ranked, start=1):
        patch = np.frombuffer(key, dtype=np.uint8).reshape(cfg.patch_size, cfg.patch_size)
        name = f"rank_{rank}_count_{count}.pgm"
        write_pgm(out_dir / name, patch)
        rows.append((rank, count, name))
        grid.append((patch, count))
        outputs.append(out_dir / name)
    csv_path = out_dir / "topk.csv"
    write_csv(csv_path, ["rank", "count", "filename"], rows)
    outputs.insert(0, csv_path)
    if not args.no_fig:
        from .plots import plot_patch_grid

        plot_patch_grid(grid, out_dir / "topk.png")
        outputs.append(out_dir / "topk.png")
    _diag(f"{acc.unique_patches} unique patches over {acc.total_patches} total")
    _write_manifest(args, [args.input], outputs, {})
    return 0


def cmd_stats_lengths(args) -> int:
    lines = read_corpus(args.input)
    cfg = _render_config(args)
    hist = length_histogram((), cfg, sequences=_sequence_stream(lines, cfg, args.workers))
    rows = [(length, hist[length]) for length in sorted(hist)]
    write_csv(args.out, ["length", "count"], rows)
    total = sum(hist.values())
    mean = sum(n * c for n, c in hist.items()) / total if total else float("nan")
    _diag(f"{total} sequences, mean length {mean:.2f} patches")
    outputs = [args.out]
    if not args.no_fig:
        from .plots import plot_length_histogram

        plot_length_histogram(hist, _fig_path(args.out))
        outputs.append(_fig_path(args.out))
    _write_manifest(args, [args.input], outputs, {})
    return 0


def cmd_stats_wordfreq(args) -> int:
    lines = read_corpus(args.input)
    table = word_frequencies(lines)
    ranked = sorted(table.items(), key=lambda kv: (-kv[1], kv[0]))[:args.k]
    write_csv(args.out, ["word", "count"], ranked)
    _diag(f"{len(table)} distinct words")
    outputs = [args.out]
    if not args.no_fig:
        from .plots import plot_word_frequencies

        plot_word_frequencies(ranked[:min(args.k, 40)], _fig_path(args.out))
        outputs.append(_fig_path(args.out))
    _write_manifest(args, [args.input], outputs, {})
    return 0


# --------------------------------------------------------------------------
# mask
# --------------------------------------------------------------------------

def cmd_mask(args) -> int:
    seed = resolve_seed(args.seed)
    cfg = MaskConfig(ratio=args.ratio, max_span=args.max_span, seed=seed)
    plan = sample_span_mask(args.n, cfg)
    atomic_write_text(args.out, plan.to_json() + "\n")
    _diag(f"masked {len(plan.masked)} of {args.n} patches in {len(plan.spans)} spans")
    _write_manifest(args, [], [args.out], {"seed": seed})
    return 0


# --------------------------------------------------------------------------
# train
# --------------------------------------------------------------------------

def cmd_train(args) -> int:
    from .model import ModelConfig, init_params, save_checkpoint, smoothed_losses, train_steps

    seed = resolve_seed(args.seed)
    lines = read_corpus(args.input)
    render_cfg = _render_config(args)
    mask_cfg = MaskConfig(ratio=args.ratio, max_span=args.max_span, seed=seed)
    model_cfg = ModelConfig.preset(args.preset)
    model = init_params(model_cfg, seed=seed)

    every = max(1, args.steps // 10)

    def progress(record) -> None:
        if record.step % every == 0 or record.step == args.steps:
            _diag(f"step {record.step}/{args.steps} loss {record.loss:.5f}")

    records = train_steps(lines, model, render_cfg, mask_cfg, args.steps,
                          lr=args.lr, seed=seed, on_record=progress)
    save_checkpoint(args.out, model, extra={
        "render": {"strategy": render_cfg.strategy.value,
                   "max_patches": render_cfg.max_patches,
                   "min_whitespace": render_cfg.min_whitespace},
        "mask": {"ratio": mask_cfg.ratio, "max_span": mask_cfg.max_span},
        "train": {"steps": args.steps, "lr": args.lr, "seed": seed,
                  "preset": args.preset, "corpus": str(args.input)},
    })
    log_path = args.log if args.log is not None else Path(str(args.out) + ".train.csv")
    write_csv(log_path, ["step", "loss", "masked_patches"],
              [(r.step, str(r.loss), r.masked_patches) for r in records])
    outputs = [args.out, log_path]
    if not args.no_fig:
        from .plots import plot_loss

        smoothed = smoothed_losses(records, window=args.smooth_window)
        fig = Path(str(args.out) + ".train.png")
        plot_loss([r.step for r in records], [r.loss for r in records], fig,
                  smoothed=list(smoothed),
                  title=f"Training loss ({render_cfg.strategy.value}, seed {seed})")
        outputs.append(fig)
    final = smoothed_losses(records, window=args.smooth_window)[-1]
    _diag(f"final smoothed loss {final:.6f} over last {args.smooth_window} steps")
    _write_manifest(args, [args.input], outputs, {"seed": seed})
    return 0


# --------------------------------------------------------------------------
# encode
# --------------------------------------------------------------------------

def _find_occurrence(info: SentenceInfo, target: str) -> WordOccurrence | None:
    """Exact token match first, then case-folded prefix (catches sentence
    case and trailing punctuation)."""
    for occ in info.words:
        if occ.word == target:
            return occ
    folded = target.casefold()
    for occ in info.words:
        if occ.word.casefold().startswith(folded):
            return occ
    return None


def _read_tsv(path, columns: int, what: str) -> list[list[str]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row:
                continue
            if len(row) != columns:
                raise ValueError(f"{path}:{i}: expected {columns} tab-separated "
                                 f"fields ({what}), got {len(row)}")
            rows.append(row)
    return rows


def cmd_encode(args) -> int:
    from .model import encode_layers, load_checkpoint

    model, config = load_checkpoint(args.model)
    saved = config.get("render", {})
    strategy = args.strategy if args.strategy is not None else saved.get("strategy", "bigrams")
    cfg = RenderConfig(
        strategy=Strategy(strategy),
        max_patches=args.max_patches if args.max_patches is not None else saved.get("max_patches", 529),
        min_whitespace=args.min_whitespace if args.min_whitespace is not None else saved.get("min_whitespace", 3),
    )
    font = load_builtin_font()

    layer_states: dict[int, list[np.ndarray]] = {}
    infos: dict[int, SentenceInfo] = {}
    wic_pairs: list[WicPair] = []
    scored_pairs: list[ScoredPair] = []

    def add_sentence(text: str) -> tuple[int, SentenceInfo] | None:
        seq = render(text, cfg, font)
        if len(seq) <= 1:
            return None
        sid = len(infos)
        info = replace(sentence_info_from_sequence(seq, sid), text=text)
        infos[sid] = info
        layer_states[sid] = encode_layers(seq, model)
        return sid, info

    skipped = 0
    if args.input is not None:
        mode = "corpus"
        inputs = [args.input]
        for line in read_corpus(args.input):
            if add_sentence(line) is None:
                skipped += 1
    elif args.wic is not None:
        mode = "wic"
        inputs = [args.wic]
        for target, label, sent_a, sent_b in _read_tsv(args.wic, 4, "word, label, sentence, sentence"):
            added_a = add_sentence(sent_a)
            added_b = add_sentence(sent_b)
            if added_a is None or added_b is None:
                skipped += 1
                _diag(f"skipping pair for {target!r}: a sentence rendered empty")
                continue
            (sid_a, info_a), (sid_b, info_b) = added_a, added_b
            occ_a = _find_occurrence(info_a, target)
            occ_b = _find_occurrence(info_b, target)
            if occ_a is None or occ_b is None:
                skipped += 1
                _diag(f"skipping pair: target {target!r} not found in both sentences")
                continue
            wic_pairs.append(WicPair(target=target, label=label, a=occ_a, b=occ_b))
    else:
        mode = "sts"
        inputs = [args.sts]
        for score, sent_a, sent_b in _read_tsv(args.sts, 3, "score, sentence, sentence"):
            added_a = add_sentence(sent_a)
            added_b = add_sentence(sent_b)
            if added_a is None or added_b is None:
                skipped += 1
                _diag("skipping scored pair: a sentence rendered empty")
                continue
            scored_pairs.append(ScoredPair(sentence_a=added_a[0], sentence_b=added_b[0],
                                           gold=float(score)))
    if skipped:
        _diag(f"skipped {skipped} input rows")
    if not infos:
        raise ValueError("no sentences survived rendering; nothing to encode")

    dump = build_dump(layer_states, infos, wic_pairs=wic_pairs, scored_pairs=scored_pairs,
                      metadata={"mode": mode, "strategy": cfg.strategy.value,
                                "model": config.get("model", {}),
                                "max_patches": cfg.max_patches,
                                "min_whitespace": cfg.min_whitespace})
    save_dump(args.out, dump)
    _diag(f"encoded {len(infos)} sentences x {dump.layers} layers (width {dump.width})")
    _write_manifest(args, [args.model] + inputs, [args.out, str(args.out) + ".json"], {})
    return 0


# --------------------------------------------------------------------------
# analyze
# --------------------------------------------------------------------------

def cmd_analyze_wic(args) -> int:
    seed = resolve_seed(args.seed)
    dump = load_dump(args.dump)
    per_layer = wic_distributions(dump, random_pairs=args.random_pairs, seed=seed)
    pairs = len(dump.wic_pairs)
    metadata = f"metric=wic pairs={pairs} random_pairs={args.random_pairs} seed={seed} layers={dump.layers}"
    return _write_distribution_report(args, per_layer, WIC_LABEL_ORDER, metadata,
                                      [args.dump], {"seed": seed})


def cmd_analyze_selfsim(args) -> int:
    dump = load_dump(args.dump)
    if args.words:
        words = list(args.words)
    else:
        by_word: dict[str, set[int]] = {}
        for occ in dump.occurrences():
            by_word.setdefault(occ.word, set()).add(occ.sentence)
        words = sorted(w for w, sents in by_word.items() if len(sents) >= 2)
    rows = []
    per_layer_values: dict[int, list[float]] = {layer: [] for layer in range(dump.layers)}
    for word in words:
        for layer in range(dump.layers):
            value = self_similarity(dump, word, layer)
            rows.append((word, layer, str(value)))
            per_layer_values[layer].append(value)
    if not words:
        _diag("no word occurs in two or more sentences; output is empty")
    metadata = f"metric=selfsim words={len(words)} layers={dump.layers}"
    write_csv(args.out, ["word", "layer", "value"], rows, metadata=metadata)
    outputs = [args.out]
    if not args.no_fig and words:
        from .plots import plot_layer_curve

        means = {layer: float(np.mean(vals)) for layer, vals in per_layer_values.items()}
        plot_layer_curve(means, _fig_path(args.out), ylabel="mean self-similarity",
                         title="Self-similarity by layer")
        outputs.append(_fig_path(args.out))
    _write_manifest(args, [args.dump], outputs, {})
    return 0


def _split_words_flag(text: str) -> tuple[str, ...]:
    return tuple(w for w in (t.strip() for t in text.split(",")) if w)


def cmd_analyze_freqbias(args) -> int:
    dump = load_dump(args.dump)
    if args.high and args.low:
        high, low = _split_words_flag(args.high), _split_words_flag(args.low)
        bucket_meta = f"high={len(high)} low={len(low)} source=flags"
    elif args.corpus is not None:
        table = word_frequencies(read_corpus(args.corpus))
        buckets = frequency_buckets(table, high_k=args.high_k,
                                    low_target=args.low_target, low_k=args.low_k)
        if not buckets.complete:
            _diag("warning: corpus too small to fill both frequency buckets")
        high, low = buckets.high, buckets.low
        bucket_meta = (f"high_k={args.high_k} low_target={args.low_target} "
                       f"low_k={args.low_k} complete={buckets.complete} source=corpus")
    else:
        raise ValueError("provide --corpus, or both --high and --low word lists")
    per_layer = {
        layer: frequency_bucket_distributions(dump, high, low, layer)
        for layer in range(dump.layers)
    }
    metadata = f"metric=freqbias {bucket_meta} layers={dump.layers}"
    inputs = [args.dump] + ([args.corpus] if args.corpus else [])
    return _write_distribution_report(args, per_layer, FREQ_LABEL_ORDER, metadata,
                                      inputs, {})


def cmd_analyze_sts(args) -> int:
    dump = load_dump(args.dump)
    curve = sts_layer_curve(dump)
    metadata = f"metric=sts pairs={len(dump.scored_pairs)} layers={dump.layers}"
    rows = [(layer, str(curve[layer])) for layer in sorted(curve)]
    write_csv(args.out, ["layer", "rho"], rows, metadata=metadata)
    outputs = [args.out]
    if not args.no_fig:
        from .plots import plot_layer_curve

        plot_layer_curve(curve, _fig_path(args.out), ylabel="Spearman rho",
                         title="Sentence-similarity correlation by layer")
        outputs.append(_fig_path(args.out))
    _write_manifest(args, [args.dump], outputs, {})
    return 0


def cmd_analyze_spearman(args) -> int:
    xs, ys = [], []
    with open(args.input, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["x", "y"]:
            raise ValueError(f"{args.input}: expected a CSV with header x,y")
        for row in reader:
            if not row:
                continue
            xs.append(float(row[0]))
            ys.append(float(row[1]))
    rho = spearman_rho(xs, ys)
    print(rho)
    outputs = []
    if args.out is not None:
        write_csv(args.out, ["rho"], [(str(rho),)],
                  metadata=f"metric=spearman n={len(xs)}")
        outputs.append(args.out)
    if outputs or args.manifest:
        _write_manifest(args, [args.input], outputs, {})
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this toolkit reserves 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _checkpoint_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("checkpoint list is empty")
    return values


def _add_render_flags(parser, with_workers: bool = True) -> None:
    parser.add_argument("--strategy", choices=STRATEGY_CHOICES, required=True,
                        help="rendering strategy")
    parser.add_argument("--max-patches", type=int, default=529,
                        help="sequence cap in patches, terminal EOS included (default 529)")
    parser.add_argument("--min-whitespace", type=int, default=3,
                        help="minimum inter-word gap in pixels (default 3)")
    if with_workers:
        parser.add_argument("--workers", type=int, default=1,
                            help="render worker processes (order-preserving; default 1)")


def _add_common(parser) -> None:
    parser.add_argument("--manifest", default=None,
                        help="manifest path (default <out>.manifest.json)")


def _add_fig_flag(parser) -> None:
    parser.add_argument("--no-fig", action="store_true",
                        help="skip the PNG figure next to the delimited output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="patchtext",
                     description="Pixel-patch text pipelines: render, measure, train, analyze.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("render", help="render a corpus into a patch dump")
    p.add_argument("--in", dest="input", required=True, help="corpus file, one sequence per line")
    p.add_argument("--out", required=True, help="patch dump output (PXPD)")
    _add_render_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_render, _subcommand="render")

    stats = sub.add_parser("stats", help="corpus statistics")
    stats_sub = stats.add_subparsers(dest="stats_command", required=True, metavar="report")

    p = stats_sub.add_parser("curve", help="unique-patch growth curve")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="CSV output")
    p.add_argument("--checkpoints", type=_checkpoint_list,
                   default=[1, 10, 100, 1000, 10000, 100000],
                   help="comma-separated sequence counts (default 1,10,...,100000)")
    _add_render_flags(p)
    _add_fig_flag(p)
    _add_common(p)
    p.set_defaults(func=cmd_stats_curve, _subcommand="stats curve")

    p = stats_sub.add_parser("topk", help="most frequent patches as PGM files")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k", type=int, default=20, help="patches to export (default 20)")
    _add_render_flags(p)
    _add_fig_flag(p)
    _add_common(p)
    p.set_defaults(func=cmd_stats_topk, _subcommand="stats topk")

    p = stats_sub.add_parser("lengths", help="sequence-length histogram")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="CSV output")
    _add_render_flags(p)
    _add_fig_flag(p)
    _add_common(p)
    p.set_defaults(func=cmd_stats_lengths, _subcommand="stats lengths")

    p = stats_sub.add_parser("wordfreq", help="word frequency table")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="CSV output")
    p.add_argument("--k", type=int, default=100, help="words to keep (default 100)")
    _add_fig_flag(p)
    _add_common(p)
    p.set_defaults(func=cmd_stats_wordfreq, _subcommand="stats wordfreq")

    p = sub.add_parser("mask", help="sample a span mask plan")
    p.add_argument("--n", type=int, required=True, help="content patch count")
    p.add_argument("--ratio", type=float, default=0.25, help="mask ratio floor (default 0.25)")
    p.add_argument("--max-span", type=int, default=6, help="span cap in patches (default 6)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="mask plan JSON output")
    _add_common(p)
    p.set_defaults(func=cmd_mask, _subcommand="mask")

    p = sub.add_parser("train", help="train the masked patch autoencoder")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="checkpoint output (PXCK)")
    p.add_argument("--preset", choices=("desk", "tiny", "small", "base"), default="desk")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--ratio", type=float, default=0.25)
    p.add_argument("--max-span", type=int, default=6)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--log", default=None, help="step log CSV (default <out>.train.csv)")
    p.add_argument("--smooth-window", type=int, default=100,
                   help="trailing-mean window for the smoothed loss (default 100)")
    _add_render_flags(p, with_workers=False)
    _add_fig_flag(p)
    _add_common(p)
    p.set_defaults(func=cmd_train, _subcommand="train")

    p = sub.add_parser("encode", help="dump per-layer embeddings for analysis")
    p.add_argument("--model", required=True, help="checkpoint (PXCK)")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--in", dest="input", default=None,
                        help="corpus file, one sentence per line")
    source.add_argument("--wic", default=None,
                        help="TSV: word, label (similar|different), sentence, sentence")
    source.add_argument("--sts", default=None, help="TSV: gold score, sentence, sentence")
    p.add_argument("--out", required=True, help="embedding dump output (PXEB)")
    p.add_argument("--strategy", choices=STRATEGY_CHOICES, default=None,
                   help="override the strategy stored in the checkpoint")
    p.add_argument("--max-patches", type=int, default=None)
    p.add_argument("--min-whitespace", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_encode, _subcommand="encode")

    analyze = sub.add_parser("analyze", help="embedding-geometry reports")
    an_sub = analyze.add_subparsers(dest="analyze_command", required=True, metavar="metric")

    p = an_sub.add_parser("wic", help="word-in-context cosine distributions")
    p.add_argument("--dump", required=True, help="embedding dump (PXEB)")
    p.add_argument("--out", required=True, help="CSV output (plus <out>_summary.csv)")
    p.add_argument("--random-pairs", type=int, default=1000,
                   help="random-baseline pair count (default 1000)")
    p.add_argument("--seed", type=int, default=None)
    _add_fig_flag(p)
    _add_common(p)
    p.set_defaults(func=cmd_analyze_wic, _subcommand="analyze wic")

    p = an_sub.add_parser("selfsim", help="same-word cross-sentence similarity")
    p.add_argument("--dump", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--words", type=_split_words_flag, default=(),
                   help="comma-separated words (default: all with >= 2 sentences)")
    _add_fig_flag(p)
    _add_common(p)
    p.set_defaults(func=cmd_analyze_selfsim, _subcommand="analyze selfsim")

    p = an_sub.add_parser("freqbias", help="frequency-bucket cosine distributions")
    p.add_argument("--dump", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--corpus", default=None, help="corpus for frequency bucketing")
    p.add_argument("--high-k", type=int, default=100)
    p.add_argument("--low-target", type=int, default=1000)
    p.add_argument("--low-k", type=int, default=100)
    p.add_argument("--high", default=None, help="explicit high-bucket words (comma-separated)")
    p.add_argument("--low", default=None, help="explicit low-bucket words (comma-separated)")
    _add_fig_flag(p)
    _add_common(p)
    p.set_defaults(func=cmd_analyze_freqbias, _subcommand="analyze freqbias")

    p = an_sub.add_parser("sts", help="per-layer rank correlation with gold scores")
    p.add_argument("--dump", required=True)
    p.add_argument("--out", required=True)
    _add_fig_flag(p)
    _add_common(p)
    p.set_defaults(func=cmd_analyze_sts, _subcommand="analyze sts")

    p = an_sub.add_parser("spearman", help="rank correlation of a two-column CSV")
    p.add_argument("--in", dest="input", required=True, help="CSV with header x,y")
    p.add_argument("--out", default=None, help="optional CSV output")
    _add_common(p)
    p.set_defaults(func=cmd_analyze_spearman, _subcommand="analyze spearman")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._started = time.monotonic()
    try:
        return int(args.func(args) or 0)
    except OSError as exc:
        _diag(f"error: {exc}")
        return 2
    except ValueError as exc:
        _diag(f"error: {exc}")
        return 3
