"""Declarative run configuration read from TOML.

Example::

    [data]
    path = "../data/pbc_long.csv"      # relative to this file
    time_unit = "years"
    [data.schema]
    event = "death"
    longitudinal = ["log_bili", "log_albumin", "log_protime"]
    fixed = ["age"]

    [model]
    kernel = "A"
    s0 = "constant"
    contenders = ["RK-A", "RK-B", "landmark"]

    [split]
    seed = 0
    n_splits = 20

    [[protocol.fixed_base]]
    t = 3.0
    u_grid = { start = 3.0, stop = 8.0, step = 0.2 }
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data import CsvSchema, SplitSpec
from .evaluation import LandmarkContender, Loss, Protocol, ProtocolBlock, RkContender, make_grid
from .kernels import KernelModel, S0Policy
from .optimize import OptimizerConfig
from .prediction import HORIZONS
from .rk import FitConfig

CONTENDERS = ("RK-A", "RK-B", "landmark")


class ConfigError(ValueError):
    pass


def _grid(value, where: str) -> tuple[float, ...]:
    if isinstance(value, dict):
        unknown = set(value) - {"start", "stop", "step"}
        if unknown or len(value) != 3:
            raise ConfigError(f"{where}: a range grid needs exactly start, stop and step")
        try:
            return make_grid(float(value["start"]), float(value["stop"]), float(value["step"]))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if isinstance(value, list):
        return tuple(float(v) for v in value)
    raise ConfigError(f"{where}: grid must be a list or a start/stop/step table")


def _take(table: dict, allowed: set[str], where: str) -> dict:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    return table


@dataclass(frozen=True)
class RunConfig:
    data_path: Path
    schema: CsvSchema
    time_unit: str = ""
    model: KernelModel = KernelModel.A
    s0: S0Policy = S0Policy.CONSTANT
    contenders: tuple[str, ...] = CONTENDERS
    landmark_times: tuple[float, ...] = ()
    horizon: str = "observed"
    loss: Loss = Loss.SQUARED
    split: SplitSpec = field(default_factory=SplitSpec)
    blocks: tuple[ProtocolBlock, ...] = ()
    fit: FitConfig = field(default_factory=FitConfig)
    out_dir: Path = Path("out")
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "model", KernelModel(self.model))
        object.__setattr__(self, "s0", S0Policy(self.s0))
        object.__setattr__(self, "loss", Loss(self.loss))
        bad = [c for c in self.contenders if c not in CONTENDERS]
        if bad:
            raise ConfigError(f"unknown contender(s) {bad}; choose from {list(CONTENDERS)}")
        if self.horizon not in HORIZONS:
            raise ConfigError(f"horizon must be one of {list(HORIZONS)}")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")

    def with_overrides(self, **overrides) -> "RunConfig":
        """Apply command-line overrides; ``None`` values are ignored."""
        kw = {k: v for k, v in overrides.items() if v is not None}
        if "seed" in kw:
            kw["split"] = replace(self.split, seed=int(kw.pop("seed")))
        if "out_dir" in kw:
            kw["out_dir"] = Path(kw["out_dir"])
        return replace(self, **kw)

    def build_contenders(self) -> list:
        out = []
        for name in self.contenders:
            if name == "landmark":
                out.append(LandmarkContender(self.fit))
            else:
                out.append(RkContender(KernelModel(name[-1]), self.s0, self.fit, self.horizon))
        return out

    def canonical(self) -> dict:
        """Everything that can change numeric results; output location and parallelism are excluded."""
        return {
            # the file name only, so the digest does not depend on where the config is run from;
            # the data content is pinned separately by the dataset digest
            "data_file": self.data_path.name,
            "schema": asdict(self.schema),
            "time_unit": self.time_unit,
            "model": self.model.value,
            "s0": self.s0.value,
            "contenders": list(self.contenders),
            "landmark_times": list(self.landmark_times),
            "horizon": self.horizon,
            "loss": self.loss.value,
            "split": asdict(self.split),
            "blocks": [{"protocol": b.protocol.value, "anchor": b.anchor, "grid": list(b.grid)} for b in self.blocks],
            "fit": asdict(self.fit),
        }

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _blocks(protocol: dict) -> tuple[ProtocolBlock, ...]:
    _take(protocol, {"fixed_base", "fixed_window"}, "[protocol]")
    blocks = []
    for i, fb in enumerate(protocol.get("fixed_base", [])):
        where = f"protocol.fixed_base[{i}]"
        _take(fb, {"t", "u_grid"}, where)
        if "t" not in fb or "u_grid" not in fb:
            raise ConfigError(f"{where}: needs t and u_grid")
        blocks.append((Protocol.FIXED_BASE, float(fb["t"]), _grid(fb["u_grid"], where)))
    for i, fw in enumerate(protocol.get("fixed_window", [])):
        where = f"protocol.fixed_window[{i}]"
        _take(fw, {"w", "t_grid"}, where)
        if "w" not in fw or "t_grid" not in fw:
            raise ConfigError(f"{where}: needs w and t_grid")
        ws = fw["w"] if isinstance(fw["w"], list) else [fw["w"]]
        grids = fw["t_grid"]
        # one t-grid shared by every window, or one per window
        if isinstance(grids, list) and grids and isinstance(grids[0], (list, dict)):
            if len(grids) != len(ws):
                raise ConfigError(f"{where}: {len(ws)} windows but {len(grids)} t-grids")
            per_w = [_grid(g, where) for g in grids]
        else:
            per_w = [_grid(grids, where)] * len(ws)
        blocks.extend((Protocol.FIXED_WINDOW, float(w), g) for w, g in zip(ws, per_w))
    out = []
    for protocol_, anchor, grid in blocks:
        try:
            out.append(ProtocolBlock(protocol_, anchor, grid))
        except ValueError as exc:
            raise ConfigError(f"{protocol_.value} block at {anchor}: {exc}") from None
    return tuple(out)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc, base_dir=path.parent)


def config_from_dict(doc: dict, base_dir=".") -> RunConfig:
    base_dir = Path(base_dir)
    _take(doc, {"data", "model", "loss", "split", "protocol", "optimizer", "output"}, "config")
    data = _take(doc.get("data", {}), {"path", "time_unit", "schema"}, "[data]")
    if "path" not in data:
        raise ConfigError("[data] needs a path")
    schema_doc = _take(data.get("schema", {}), set(CsvSchema.__dataclass_fields__), "[data.schema]")
    model = _take(doc.get("model", {}), {"kernel", "s0", "contenders", "landmark_times", "horizon"}, "[model]")
    split_doc = _take(doc.get("split", {}), {"seed", "fraction", "n_splits"}, "[split]")
    opt = dict(_take(doc.get("optimizer", {}),
                     set(OptimizerConfig.__dataclass_fields__) | {"tau_starts", "a_start", "gamma_start"},
                     "[optimizer]"))
    output = _take(doc.get("output", {}), {"dir", "jobs"}, "[output]")
    fit_kw = {k: opt.pop(k) for k in ("tau_starts", "a_start", "gamma_start") if k in opt}
    if "tau_starts" in fit_kw:
        fit_kw["tau_starts"] = tuple(float(t) for t in fit_kw["tau_starts"])
    out_dir = Path(output.get("dir", "out"))
    try:
        return RunConfig(
            data_path=base_dir / data["path"],
            schema=CsvSchema(**schema_doc),
            time_unit=data.get("time_unit", ""),
            model=model.get("kernel", "A"),
            s0=model.get("s0", "constant"),
            contenders=tuple(model.get("contenders", CONTENDERS)),
            landmark_times=tuple(float(v) for v in model.get("landmark_times", [])),
            horizon=model.get("horizon", "observed"),
            loss=doc.get("loss", "squared"),
            split=SplitSpec(**split_doc),
            blocks=_blocks(doc.get("protocol", {})),
            fit=FitConfig(OptimizerConfig(**opt), **fit_kw),
            out_dir=out_dir if out_dir.is_absolute() else base_dir / out_dir,
            jobs=int(output.get("jobs", 1)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
