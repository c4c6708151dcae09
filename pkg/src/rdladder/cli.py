"""Command-line entry points.

Subcommands: ``train`` (fit a model from measurements), ``verify-paper``
(check the built-in model's derived tables against their published
reference values), ``recommend`` (per-GOP advice from a measurement
file), ``plotdata`` (curve and marker samples for external plotting) and
``serve`` (the advisory HTTP endpoint).

Exit codes: 0 success, 1 validation/input error, 2 internal error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .clustering import BitrateGrid, ClusterModelSet, resample_to_grid, train_details
from .decision import (
    DecisionConfig,
    GopObservation,
    Modes,
    build_ladders,
    nzs_intervals,
    recommend,
    savings_report,
    vl_thresholds,
)
from .errors import RDLadderError, ValidationError
from .ingest import builtin_model, load_model, parse_measurements, save_model
from .rd_model import compare_fits, eval_cubic
from .service import make_server, recommendation_to_dict
from .verify import all_passed, render_report, verify_rows

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2
EXIT_VERIFY = 3

PLOT_STEP = 0.05


def _parse_grid(spec: str) -> BitrateGrid:
    """Grid flag: either 'lo:hi:count' (linear spacing) or an explicit
    comma-separated bitrate list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid spec {spec!r} must be lo:hi:count or a comma list")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ValidationError(f"grid spec {spec!r}: bad number") from None
        return BitrateGrid.linspace(lo, hi, count)
    try:
        return BitrateGrid(tuple(float(p) for p in spec.split(",") if p.strip()))
    except ValueError:
        raise ValidationError(f"grid spec {spec!r}: bad number") from None


def _load_model_source(args) -> ClusterModelSet:
    if getattr(args, "paper_model", False):
        return builtin_model()
    return load_model(Path(args.model).read_text(encoding="utf-8"))


def _decision_config(args) -> DecisionConfig:
    return DecisionConfig(vl_psnr=args.vl_psnr, nzs_slope=args.nzs_slope)


def _observations(mset, model_set):
    """One observation per GOP, taken at the highest tier it was measured
    at that the model also knows."""
    obs = []
    for gop_id in mset.gop_ids():
        tiers = [t for t in mset.tiers_for(gop_id) if model_set.has_tier(t)]
        if not tiers:
            raise ValidationError(f"gop {gop_id!r}: no measured tier is present in the model")
        tier = max(tiers)
        samples = mset.samples[(gop_id, tier)]
        points = tuple((s.bitrate, s.psnr) for s in samples)
        obs.append(GopObservation(gop_id=gop_id, tier=tier, points=points))
    return obs


def cmd_train(args) -> int:
    text = Path(args.measurements).read_text(encoding="utf-8")
    mset = parse_measurements(text, source=args.measurements)
    grid = _parse_grid(args.grid) if args.grid else BitrateGrid.default()

    by_tier: dict = {}
    for (gop_id, tier), samples in mset.groups():
        by_tier.setdefault(tier, []).append(resample_to_grid(samples, grid))
    model_set, kmeans_results = train_details(by_tier, grid, k=args.k, seed=args.seed)

    Path(args.out).write_text(save_model(model_set), encoding="utf-8")
    for tier in model_set.tiers:
        result = kmeans_results[tier]
        print(f"tier {tier}: inertia {result.inertia:.6f} over {result.n_iter} iterations")
    for cluster in model_set.clusters:
        for tier in model_set.tiers:
            centroid = model_set.centroid(cluster, tier)
            report = compare_fits(list(zip(grid.bitrates, centroid)))
            mses = " ".join(f"{fam}={report.mse[fam]:.3e}" for fam in sorted(report.mse))
            print(f"cluster {cluster} {tier}: chosen {report.chosen} ({mses})")
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_verify_paper(args) -> int:
    rows = verify_rows(_decision_config(args))
    if args.format == "json":
        print(json.dumps([row.__dict__ for row in rows], indent=2))
    else:
        print(render_report(rows))
    return EXIT_OK if all_passed(rows) else EXIT_VERIFY


def cmd_recommend(args) -> int:
    model_set = _load_model_source(args)
    cfg = _decision_config(args)
    modes = Modes.parse(args.modes)
    if not modes.any_enabled:
        raise ValidationError("at least one mode must be enabled (--modes)")
    text = Path(args.measurements).read_text(encoding="utf-8")
    mset = parse_measurements(text, source=args.measurements)
    if len(mset) == 0:
        raise ValidationError(f"{args.measurements}: no measurement rows")

    ladders = build_ladders(model_set, cfg) if modes.trans_size else None
    thresholds = vl_thresholds(model_set, cfg) if modes.vl else None
    intervals = nzs_intervals(model_set, cfg) if modes.nzs else None

    results = []
    for obs in _observations(mset, model_set):
        try:
            rec = recommend(
                obs, model_set, cfg, modes, args.target_bitrate,
                ladders=ladders, thresholds=thresholds, intervals=intervals,
            )
            results.append((obs.gop_id, rec, None))
        except RDLadderError as exc:
            results.append((obs.gop_id, None, str(exc)))

    pairs = [(r.target_bitrate, r.proposed_bitrate) for _, r, _ in results if r is not None]
    report = savings_report({"all": pairs}) if pairs else None

    if args.format == "json":
        doc = {
            "recommendations": [
                recommendation_to_dict(rec) if rec else {"gop_id": gop_id, "error": err}
                for gop_id, rec, err in results
            ],
            "savings": None
            if report is None
            else {
                "total_target": report.total_target,
                "total_proposed": report.total_proposed,
                "saving_percent": report.saving_percent,
            },
        }
        print(json.dumps(doc, indent=2))
    elif args.format == "csv":
        print("gop_id,cluster,tier,target_bitrate_mbps,proposed_bitrate_mbps,predicted_psnr_db,modes_applied")
        for gop_id, rec, err in results:
            if rec is None:
                print(f"# {gop_id}: {err}")
            else:
                modes_applied = "+".join(rec.modes_applied)
                print(
                    f"{rec.gop_id},{rec.cluster},{rec.tier.name},{rec.target_bitrate:.3f},"
                    f"{rec.proposed_bitrate:.3f},{rec.predicted_psnr:.2f},{modes_applied}"
                )
        if report is not None:
            print(f"# total_target={report.total_target:.3f}")
            print(f"# total_proposed={report.total_proposed:.3f}")
            print(f"# saving_percent={report.saving_percent:.3f}")
    else:
        for gop_id, rec, err in results:
            if rec is None:
                print(f"{gop_id}: ERROR {err}")
            else:
                print(
                    f"{rec.gop_id}: cluster {rec.cluster}, {rec.tier.name}, "
                    f"{rec.target_bitrate:.3f} -> {rec.proposed_bitrate:.3f} Mbps, "
                    f"predicted {rec.predicted_psnr:.2f} dB ({rec.rationale})"
                )
        if report is not None:
            print(
                f"total {report.total_target:.3f} -> {report.total_proposed:.3f} Mbps, "
                f"saving {report.saving_percent:.2f}%"
            )
    return EXIT_OK


def cmd_plotdata(args) -> int:
    model_set = _load_model_source(args)
    cfg = _decision_config(args)
    if args.cluster == "all":
        clusters = list(model_set.clusters)
    else:
        try:
            index = int(args.cluster)
        except ValueError:
            raise ValidationError(f"--cluster must be an index or 'all', got {args.cluster!r}") from None
        if index not in model_set.clusters:
            raise ValidationError(f"unknown cluster index {index}")
        clusters = [index]

    lo, hi = cfg.operating_range
    steps = int((hi - lo) / PLOT_STEP + 1e-9) + 1
    bitrates = [lo + PLOT_STEP * i for i in range(steps)]

    ladders = build_ladders(model_set, cfg)
    thresholds = vl_thresholds(model_set, cfg)
    intervals = nzs_intervals(model_set, cfg)

    print("record,cluster,tier,bitrate_mbps,psnr_db")
    for cluster in clusters:
        for tier in model_set.tiers:
            model = model_set.model(cluster, tier)
            for r in bitrates:
                print(f"curve,{cluster},{tier.name},{r:.6g},{eval_cubic(model, r):.6g}")
        for i, bp in enumerate(ladders[cluster].breakpoints):
            left = ladders[cluster].segments[i].tier
            right = ladders[cluster].segments[i + 1].tier
            psnr = eval_cubic(model_set.model(cluster, right), bp)
            print(f"knee,{cluster},{left.name}/{right.name},{bp:.6g},{psnr:.6g}")
        for tier in model_set.tiers:
            threshold = thresholds[(cluster, tier)]
            if threshold is not None:
                print(f"vl_threshold,{cluster},{tier.name},{threshold.bitrate:.6g},{cfg.vl_psnr:.6g}")
            interval = intervals[(cluster, tier)]
            if interval is not None:
                model = model_set.model(cluster, tier)
                print(f"nzs_low,{cluster},{tier.name},{interval.lo:.6g},{eval_cubic(model, interval.lo):.6g}")
                print(f"nzs_high,{cluster},{tier.name},{interval.hi:.6g},{eval_cubic(model, interval.hi):.6g}")
    return EXIT_OK


def cmd_serve(args) -> int:
    model_set = _load_model_source(args)
    cfg = _decision_config(args)
    host, _, port_s = args.bind.rpartition(":")
    if not host or not port_s:
        raise ValidationError(f"--bind must be HOST:PORT, got {args.bind!r}")
    try:
        port = int(port_s)
    except ValueError:
        raise ValidationError(f"--bind port {port_s!r} is not an integer") from None
    try:
        server = make_server(model_set, host, port, cfg, quiet=False)
    except OSError as exc:
        raise ValidationError(f"cannot bind {args.bind}: {exc}") from None
    print(f"advisory endpoint on http://{host}:{server.server_address[1]}/v1/recommend")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def _add_model_source(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="path to a model file")
    group.add_argument(
        "--paper-model", action="store_true",
        help="use the built-in reference model instead of a model file",
    )


def _add_decision_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--vl-psnr", type=float, default=40.0,
                        help="visually-lossless quality target in dB (default 40)")
    parser.add_argument("--nzs-slope", type=float, default=0.1,
                        help="near-zero-slope threshold in dB/Mbps (default 0.1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdladder",
        description="Parametric R-D transcoding model: train, verify, recommend.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a cluster model from a measurement CSV")
    p.add_argument("measurements", help="measurement CSV path")
    p.add_argument("--out", required=True, help="output model file path")
    p.add_argument("--k", type=int, default=6, help="number of clusters (default 6)")
    p.add_argument("--seed", type=int, default=42, help="clustering seed (default 42)")
    p.add_argument("--grid", help="bitrate grid, lo:hi:count or comma list (default 0.2:6:10)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser(
        "verify-paper",
        help="check the built-in model's derived tables against published reference values",
    )
    p.add_argument("--format", choices=("human", "json"), default="human")
    _add_decision_flags(p)
    p.set_defaults(func=cmd_verify_paper)

    p = sub.add_parser("recommend", help="per-GOP transcoding recommendations")
    _add_model_source(p)
    p.add_argument("measurements", help="measurement CSV path")
    p.add_argument("--target-bitrate", type=float, required=True,
                   help="target transcoding bitrate in Mbps")
    p.add_argument("--modes", default="trans_size,vl,nzs",
                   help="comma list of trans_size,vl,nzs (default all)")
    p.add_argument("--format", choices=("human", "json", "csv"), default="human")
    _add_decision_flags(p)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("plotdata", help="emit curve samples and markers as CSV")
    _add_model_source(p)
    p.add_argument("--cluster", default="all", help="cluster index or 'all' (default all)")
    _add_decision_flags(p)
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("serve", help="run the advisory HTTP endpoint")
    _add_model_source(p)
    p.add_argument("--bind", default="127.0.0.1:8080", help="HOST:PORT (default 127.0.0.1:8080)")
    _add_decision_flags(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are input errors here.
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        return args.func(args)
    except RDLadderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
