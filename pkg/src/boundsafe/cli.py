"""Command line: ``boundsafe generate | analyze | rerender``."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from . import analyzer
from .composer import BatchFailure, render, render_batch, sample_scene
from .config import ConfigError, GenConfig, load_config
from .io import directory_checksum, read_meta, read_sample, rerender, write_sample


def _config(args) -> GenConfig:
    cfg = load_config(args.config) if args.config else GenConfig()
    overrides = {
        "count": args.count, "global_seed": args.seed, "mode": args.mode,
        "tau_gap": args.tau_gap,
    }
    if args.command == "generate":
        overrides.update(output_format=args.format, output_dir=args.out)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.allow_unsafe_gap:
        overrides["allow_unsafe_gap"] = True
    return cfg.replace(**overrides) if overrides else cfg


def _add_scene_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML config file (flat mapping)")
    p.add_argument("--count", type=int, help="number of volumes")
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("--mode", choices=("shielded", "naive"))
    p.add_argument("--tau-gap", type=int, help="gap width in voxels")
    p.add_argument("--allow-unsafe-gap", action="store_true",
                   help="accept a gap narrower than kernel_size - 1 (emits a warning)")
    p.add_argument("--parallelism", type=int, help="worker processes (default: CPU count, capped by BOUNDSAFE_THREADS)")


def cmd_generate(args) -> int:
    cfg = _config(args)
    out = Path(cfg.output_dir)
    failed = []
    for item in render_batch(cfg.global_seed, cfg.count, cfg, args.parallelism, keep_going=True):
        if isinstance(item, BatchFailure):
            failed.append(item.volume_index)
            print(f"error: volume {item.volume_index}: {item.message}", file=sys.stderr)
            continue
        try:
            write_sample(item, cfg.output_format, out)
        except OSError as e:
            failed.append(item.spec.volume_index)
            print(f"error: volume {item.spec.volume_index}: {e}", file=sys.stderr)
    done = cfg.count - len(failed)
    print(f"wrote {done} volume(s) to {out}" + (f"; checksum {directory_checksum(out)}" if done else ""))
    if failed:
        print(f"failed indices: {failed}", file=sys.stderr)
        return 1
    return 0


def _analysis_samples(args):
    if args.input:
        metas = sorted(Path(args.input).glob("*_meta.json"))
        if not metas:
            raise FileNotFoundError(f"no *_meta.json sidecars under {args.input}")
        for m in metas:
            yield read_sample(m)
        return
    cfg = _config(args)
    for i in range(cfg.count):
        yield render(sample_scene(cfg.global_seed, i, cfg))


def cmd_analyze(args) -> int:
    reports, decomposition = {}, {}
    for sample in _analysis_samples(args):
        idx = sample.spec.volume_index
        reports[idx] = analyzer.bsr_map(sample, args.epsilon, args.mc)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            decomposition[str(idx)] = {
                str(k): analyzer.decomposition_check(sample, k).summary() for k in range(len(sample.spec.objects))
            }
    paths = analyzer.write_reports(reports, args.out, extra={"decomposition": decomposition})
    pooled = analyzer.pooled_summary(reports.values())
    print(f"analyzed {len(reports)} volume(s); median BSR {pooled['bsr_median']}; "
          f"frac_aliased {pooled['frac_aliased']}; reports: {', '.join(map(str, paths))}")
    return 0


def cmd_rerender(args) -> int:
    status = 0
    for meta in args.meta:
        sample, ok = rerender(meta)
        if args.out:
            write_sample(sample, read_meta(meta)["format"], args.out)
        print(f"{meta}: {'checksums match' if ok else 'CHECKSUM MISMATCH'}")
        status |= not ok
    return int(status)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boundsafe", description="Boundary-safe synthetic volume generator")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a batch of volumes to disk")
    _add_scene_flags(g)
    g.add_argument("--out", help="output directory")
    g.add_argument("--format", choices=("raw", "nifti"))
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("analyze", help="boundary saliency report for stored or freshly generated volumes")
    _add_scene_flags(a)
    a.add_argument("--input", type=Path, help="directory of stored volumes (default: generate in memory)")
    a.add_argument("--out", type=Path, default=Path("report"), help="report directory")
    a.add_argument("--epsilon", type=float, default=analyzer.DEFAULT_EPSILON)
    a.add_argument("--mc", type=int, default=analyzer.DEFAULT_MC_REALIZATIONS, help="texture realizations")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("rerender", help="rebuild volumes from sidecars and verify checksums")
    r.add_argument("meta", nargs="+", type=Path, help="<index>_meta.json sidecar(s)")
    r.add_argument("--out", type=Path, help="also write the rebuilt volumes here")
    r.set_defaults(func=cmd_rerender)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
