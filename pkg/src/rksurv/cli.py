"""Command-line front end: ``rksurv {fit,predict,evaluate,split,validate}``.

Exit codes: 0 success, 1 numerical failure, 2 configuration or data error,
3 fit/dataset digest mismatch. Failures print a one-line JSON report on
stderr and also write it to ``<out>/error.json`` when the output directory
is known. Set ``RK_LOG`` (e.g. ``DEBUG``, ``INFO``) for log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .data import DataError, Dataset, load_long_csv, split
from .evaluation import run_protocols, write_curves_csv, write_per_split_csv
from .landmark import LandmarkModel, fit_landmark, last_observed, predict_lm_conditional
from .optimize import NonFiniteObjective
from .prediction import RkPredictor
from .rk import FittedRkModel, fit_rk

log = logging.getLogger("rksurv")

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG, EXIT_DIGEST = 0, 1, 2, 3
_LEVELS = ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG")


class DigestMismatch(RuntimeError):
    pass


def _stamp(cfg: RunConfig) -> dict:
    return {"config_digest": cfg.digest(), "version": __version__}


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_data(cfg: RunConfig, path=None) -> Dataset:
    path = Path(path) if path is not None else cfg.data_path
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    return load_long_csv(path, cfg.schema, cfg.time_unit)


def _landmark_name(upsilon: float) -> str:
    return f"fit_landmark_{upsilon:g}.json"


def cmd_fit(cfg: RunConfig, args) -> int:
    data = _load_data(cfg)
    digest = data.digest()
    train = data if args.split is None else split(data, cfg.split, args.split)[0]
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if not args.landmark_only:
        fitted = fit_rk(train, cfg.model, cfg.s0, cfg.fit)
        doc = {**fitted.to_dict(digest), **_stamp(cfg), "split": args.split}
        path = cfg.out_dir / f"fit_{cfg.model.value}.json"
        _write_json(path, doc)
        written.append(path)
        log.info("model %s: -log PL %.10g, converged=%s", cfg.model.value, fitted.objective_value, fitted.converged)
    for upsilon in sorted(set(cfg.landmark_times) | set(args.landmark or [])):
        lm = fit_landmark(train, upsilon, cfg.fit)
        path = cfg.out_dir / _landmark_name(upsilon)
        _write_json(path, {**lm.to_dict(digest), **_stamp(cfg), "split": args.split})
        written.append(path)
    print(json.dumps({"written": [str(p) for p in written]}))
    return EXIT_OK


def _read_queries(path: Path) -> list[dict]:
    if not path.exists():
        raise DataError(f"queries file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("id", "t", "u"):
            if col not in header:
                raise DataError(f"column {col!r} not found in {path.name}", column=col)
        queries = []
        for line, row in enumerate(reader, start=2):
            try:
                t, u = float(row["t"]), float(row["u"])
                lower_cell = (row.get("lower_time") or "").strip()
                lower = float(lower_cell) if lower_cell else t
            except (TypeError, ValueError):
                raise DataError("non-numeric t, u or lower_time", row.get("id"), line) from None
            if not (0 <= t <= lower <= u):
                raise DataError(f"need 0 <= t <= lower_time <= u, got t={t}, lower_time={lower}, u={u}",
                                row["id"], line)
            queries.append({"id": row["id"].strip(), "t": t, "u": u, "lower": lower, "line": line})
    return queries


def cmd_predict(cfg: RunConfig, args) -> int:
    data = _load_data(cfg)
    doc = json.loads(Path(args.fit).read_text(encoding="utf-8"))
    if doc.get("dataset_digest") != data.digest():
        raise DigestMismatch(f"fit {args.fit} was made on dataset {doc.get('dataset_digest')}, "
                             f"configured data has {data.digest()}")
    subjects = data if args.subjects is None else _load_data(cfg, args.subjects)
    queries = _read_queries(Path(args.queries))
    kind = doc.get("kind")
    if kind == "rk":
        fitted = FittedRkModel.from_dict(doc, data)
        predictor = RkPredictor(fitted, cfg.horizon)
        model_name, s0 = f"RK-{fitted.model.value}", fitted.s0.value

        def predict(subject, t, u, lower):
            return predictor.survival(subject, t, u, lower)
    elif kind == "landmark":
        lm = LandmarkModel.from_dict(doc)
        model_name, s0 = "landmark", ""

        def predict(subject, t, u, lower):
            if lower < lm.landmark_time:
                raise DataError(f"lower_time {lower} precedes landmark time {lm.landmark_time}", subject.id)
            return predict_lm_conditional(lm, (last_observed(subject, t), subject.fixed), u, lower)
    else:
        raise ConfigError(f"{args.fit}: unknown fit kind {kind!r}")

    out = Path(args.output) if args.output else cfg.out_dir / f"predictions_{Path(args.fit).stem}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(cfg)
    rows = []
    for q in queries:
        try:
            subject = subjects.subject(q["id"])
        except KeyError:
            raise DataError("query subject not in data", q["id"], q["line"]) from None
        pi = predict(subject, q["t"], q["u"], q["lower"])
        rows.append([q["id"], repr(q["t"]), repr(q["u"]), repr(q["lower"]), repr(pi), model_name, s0,
                     int(q["lower"] != q["t"]), *stamp.values()])
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "t", "u", "lower_time", "pi", "model", "s0", "conditional", *stamp])
        w.writerows(rows)
    print(json.dumps({"written": str(out), "rows": len(rows)}))
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, args) -> int:
    if not cfg.blocks:
        raise ConfigError("no protocol block configured; add [[protocol.fixed_base]] or [[protocol.fixed_window]]")
    if not cfg.contenders:
        raise ConfigError("no contenders configured")
    data = _load_data(cfg)
    curves = run_protocols(cfg.build_contenders(), data, cfg.split, cfg.blocks, cfg.loss, cfg.jobs)
    flat = [c for block in curves for c in block.values()]
    stamp = _stamp(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_curves_csv(flat, cfg.out_dir / "pe.csv", stamp)
    write_per_split_csv(flat, cfg.out_dir / "pe_per_split.csv", stamp)
    failures = sorted({f for c in flat for f in c.failures})
    meta = {**stamp, "dataset_digest": data.digest(), "config": cfg.canonical(), "failures": failures,
            "split_sampling": "unstratified uniform"}
    _write_json(cfg.out_dir / "pe_meta.json", meta)
    print(json.dumps({"written": [str(cfg.out_dir / n) for n in ("pe.csv", "pe_per_split.csv", "pe_meta.json")],
                      "failures": len(failures)}))
    return EXIT_OK


def cmd_split(cfg: RunConfig, args) -> int:
    data = _load_data(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(cfg)
    path = cfg.out_dir / "splits.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["split", "id", "role", *stamp])
        for k in range(cfg.split.n_splits):
            train, test = split(data, cfg.split, k)
            for role, part in (("train", train), ("test", test)):
                for sid in part.ids:
                    w.writerow([k, sid, role, *stamp.values()])
    print(json.dumps({"written": str(path)}))
    return EXIT_OK


def cmd_validate(cfg: RunConfig, args) -> int:
    data = _load_data(cfg)
    report = {
        "subjects": len(data),
        "events": data.n_events,
        "observations": sum(s.n_obs for s in data),
        "longitudinal": list(data.long_names),
        "fixed": list(data.fixed_names),
        "baseline_only": sum(s.final_obs_time == 0 for s in data),
        "dataset_digest": data.digest(),
        "protocol_blocks": len(cfg.blocks),
        **_stamp(cfg),
    }
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "evaluate": cmd_evaluate, "split": cmd_split,
            "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML run configuration")
    common.add_argument("--model", choices=["A", "B"], help="kernel model (overrides config)")
    common.add_argument("--s0", choices=["constant", "decay"], help="association for baseline-only subjects")
    common.add_argument("--loss", choices=["squared", "absolute"])
    common.add_argument("--seed", type=int, help="split seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="parallel worker processes (results do not depend on it)")

    parser = argparse.ArgumentParser(prog="rksurv", description="Retarded-kernel dynamic survival prediction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit an RK model (and optional landmark models)")
    p.add_argument("--split", type=int, help="fit on the training half of this split instead of all data")
    p.add_argument("--landmark", type=float, action="append", help="also fit a landmark model at this time")
    p.add_argument("--landmark-only", action="store_true", help="skip the RK fit")

    p = sub.add_parser("predict", parents=[common], help="survival probabilities for a CSV of queries")
    p.add_argument("--fit", required=True, help="fit JSON written by 'fit'")
    p.add_argument("--queries", required=True, help="CSV with columns id, t, u and optional lower_time")
    p.add_argument("--subjects", help="long-format CSV holding the query subjects (default: configured data)")
    p.add_argument("--output", help="predictions CSV (default: <out>/predictions_<fit>.csv)")

    sub.add_parser("evaluate", parents=[common], help="run the configured prediction-error protocols")
    sub.add_parser("split", parents=[common], help="write the train/test membership of every split")
    sub.add_parser("validate", parents=[common], help="load and check the data, print a summary")
    return parser


def _report(exc: BaseException, code: int, out_dir: Path | None) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("column", "subject_id", "line"):
        value = getattr(exc, attr, None)
        if value is not None:
            doc[attr] = value
    text = json.dumps(doc, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "error.json").write_text(text + "\n", encoding="utf-8")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    level = os.environ.get("RK_LOG", "WARNING").upper()
    logging.basicConfig(level=level if level in _LEVELS else "WARNING", stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out) if args.out else None
    try:
        cfg = load_config(args.config).with_overrides(model=args.model, s0=args.s0, loss=args.loss,
                                                      seed=args.seed, out_dir=args.out, jobs=args.jobs)
        out_dir = cfg.out_dir
        return COMMANDS[args.command](cfg, args)
    except DigestMismatch as exc:
        return _report(exc, EXIT_DIGEST, out_dir)
    except (ConfigError, DataError, OSError, json.JSONDecodeError, KeyError) as exc:
        return _report(exc, EXIT_CONFIG, out_dir)
    except (FloatingPointError, NonFiniteObjective, ArithmeticError) as exc:
        return _report(exc, EXIT_NUMERIC, out_dir)
    except ValueError as exc:
        return _report(exc, EXIT_CONFIG, out_dir)


if __name__ == "__main__":
    sys.exit(main())
