"""Scenario files, run orchestration, and trace/report emission.

Scenario schema (single JSON document; units are meters, seconds, radians):

    {
      "description": "optional free text",
      "graph": {"n": 4, "directed": true, "edges": [[1, 2], [2, 3]]},
      "agents": [
        {"rotation": [[...], [...], [...]],   # 3x3 row-major, proper rotation
         "translation": [x, y, z],
         "linear_velocity": [vx, vy, vz],     # body frame, m/s
         "angular_velocity": [wx, wy, wz]},   # body frame, rad/s
        ...
      ],
      "law": {"name": "asymptotic"} | {"name": "finite", "alpha": 0.5, "epsilon": 1e-9},
      "integration": {"dt": 0.001, "t_end": 10.0, "stride": 10, "seed": 7},
      "reconstruction": "twocol" | "full"
    }

An edge [i, j] means agent i measures and receives from agent j (j is a
neighbor of i). For undirected graphs each link is listed once; the loader
adds the reversed pair. Unknown keys anywhere are rejected.

Outputs of ``framelocal run``: trace.csv (t, per-agent orientation errors,
per-link position errors, V), oracle.json, summary.json, and optionally
state.csv with full per-agent state dumps. Floats are emitted with 17
significant digits so every value round-trips exactly; repeated runs with
the same config and seed produce byte-identical files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .estimators import Asymptotic, FiniteTime, ReconstructionMode
from .graphs import Topology
from .se3 import Pose, Rotation, Twist
from .simulation import (
    ConfigurationError,
    OracleReport,
    Scenario,
    Trace,
    run,
    settling_time,
)


class ScenarioError(ValueError):
    """A scenario file failed to parse or validate."""


@dataclass(frozen=True)
class RunConfig:
    """CLI inputs for one run: scenario path plus optional overrides."""

    scenario_path: str
    out_dir: str = "."
    law: str | None = None
    alpha: float | None = None
    dt: float | None = None
    t_end: float | None = None
    seed: int | None = None
    stride: int | None = None
    mode: str | None = None
    full_state: bool = False


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package (e.g. 'demo_asymptotic')."""
    res = resources.files("framelocal").joinpath("scenarios", f"{name}.json")
    return Path(str(res))


def _require_keys(section, allowed: set, required: set, where: str):
    if not isinstance(section, dict):
        raise ScenarioError(f"{where}: expected an object")
    unknown = set(section) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = required - set(section)
    if missing:
        raise ScenarioError(f"{where}: missing key(s) {sorted(missing)}")


def _vec3(value, where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,):
        raise ScenarioError(f"{where}: expected 3 numbers, got {value!r}")
    return arr


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file (strict: unknown keys rejected)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"{path}: {e.strerror or e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}:{e.lineno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be an object")

    _require_keys(
        doc,
        {"description", "graph", "agents", "law", "integration", "reconstruction"},
        {"graph", "agents", "law", "integration", "reconstruction"},
        str(path),
    )

    g = doc["graph"]
    _require_keys(g, {"n", "directed", "edges"}, {"n", "directed", "edges"}, "graph")
    try:
        if g["directed"]:
            topo = Topology(int(g["n"]), tuple((int(i), int(j)) for i, j in g["edges"]))
        else:
            topo = Topology.undirected(int(g["n"]), g["edges"])
    except (ValueError, TypeError) as e:
        raise ScenarioError(f"graph: {e}") from e

    agents = doc["agents"]
    if not isinstance(agents, list) or len(agents) != topo.n:
        raise ScenarioError(f"agents: expected a list of {topo.n} entries")
    poses, twists = [], []
    for idx, a in enumerate(agents, start=1):
        where = f"agents[{idx}]"
        _require_keys(
            a,
            {"rotation", "translation", "linear_velocity", "angular_velocity"},
            {"rotation", "translation", "linear_velocity", "angular_velocity"},
            where,
        )
        rot = np.asarray(a["rotation"], dtype=np.float64)
        if rot.shape != (3, 3):
            raise ScenarioError(f"{where}.rotation: expected a 3x3 matrix")
        try:
            poses.append(Pose(Rotation(rot), _vec3(a["translation"], f"{where}.translation")))
        except ValueError as e:
            raise ScenarioError(f"{where}: {e}") from e
        twists.append(
            Twist(
                _vec3(a["linear_velocity"], f"{where}.linear_velocity"),
                _vec3(a["angular_velocity"], f"{where}.angular_velocity"),
            )
        )

    law_doc = doc["law"]
    _require_keys(law_doc, {"name", "alpha", "epsilon"}, {"name"}, "law")
    try:
        law = _parse_law(law_doc)
    except ValueError as e:
        raise ScenarioError(f"law: {e}") from e

    integ = doc["integration"]
    _require_keys(
        integ, {"dt", "t_end", "stride", "seed"}, {"dt", "t_end", "stride", "seed"}, "integration"
    )

    mode_name = doc["reconstruction"]
    try:
        mode = ReconstructionMode(mode_name)
    except ValueError:
        raise ScenarioError(
            f"reconstruction: expected 'full' or 'twocol', got {mode_name!r}"
        ) from None

    try:
        return Scenario(
            topo=topo,
            initial_poses=tuple(poses),
            twists=tuple(twists),
            law=law,
            dt=float(integ["dt"]),
            t_end=float(integ["t_end"]),
            seed=int(integ["seed"]),
            stride=int(integ["stride"]),
            reconstruction=mode,
        )
    except (ValueError, TypeError) as e:
        raise ScenarioError(f"integration: {e}") from e


def _parse_law(law_doc: dict):
    name = law_doc["name"]
    if name == "asymptotic":
        if "alpha" in law_doc or "epsilon" in law_doc:
            raise ValueError("alpha/epsilon only apply to the finite-time law")
        return Asymptotic()
    if name == "finite":
        return FiniteTime(
            alpha=float(law_doc.get("alpha", 0.5)),
            epsilon=float(law_doc.get("epsilon", 1e-9)),
        )
    raise ValueError(f"name must be 'asymptotic' or 'finite', got {name!r}")


def save_scenario(s: Scenario, path, description: str = ""):
    """Write a scenario as canonical JSON (exact float round trip)."""
    if s.topo.directed:
        edges = [[i, j] for i, j in s.topo.edges]
    else:
        edges = [[i, j] for i, j in s.topo.edges if i < j]
    doc = {
        "graph": {"n": s.topo.n, "directed": s.topo.directed, "edges": edges},
        "agents": [
            {
                "rotation": [[float(x) for x in row] for row in p.rotation.r],
                "translation": [float(x) for x in p.translation],
                "linear_velocity": [float(x) for x in tw.linear],
                "angular_velocity": [float(x) for x in tw.angular],
            }
            for p, tw in zip(s.initial_poses, s.twists)
        ],
        "law": (
            {"name": "asymptotic"}
            if isinstance(s.law, Asymptotic)
            else {"name": "finite", "alpha": s.law.alpha, "epsilon": s.law.epsilon}
        ),
        "integration": {
            "dt": s.dt,
            "t_end": s.t_end,
            "stride": s.stride,
            "seed": s.seed,
        },
        "reconstruction": s.reconstruction.value,
    }
    if description:
        doc = {"description": description, **doc}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def apply_overrides(s: Scenario, cfg: RunConfig) -> Scenario:
    """Rebuild the scenario with CLI overrides, re-running all validation."""
    changes = {}
    if cfg.law is not None or cfg.alpha is not None:
        law_name = cfg.law
        if law_name is None:
            law_name = "finite" if isinstance(s.law, FiniteTime) else "asymptotic"
        if law_name == "asymptotic":
            if cfg.alpha is not None:
                raise ScenarioError("alpha only applies to the finite-time law")
            changes["law"] = Asymptotic()
        else:
            base = s.law if isinstance(s.law, FiniteTime) else FiniteTime()
            alpha = cfg.alpha if cfg.alpha is not None else base.alpha
            changes["law"] = FiniteTime(alpha=alpha, epsilon=base.epsilon)
    if cfg.dt is not None:
        changes["dt"] = cfg.dt
    if cfg.t_end is not None:
        changes["t_end"] = cfg.t_end
    if cfg.seed is not None:
        changes["seed"] = cfg.seed
    if cfg.stride is not None:
        changes["stride"] = cfg.stride
    if cfg.mode is not None:
        changes["reconstruction"] = ReconstructionMode(cfg.mode)
    try:
        return dataclasses.replace(s, **changes) if changes else s
    except ValueError as e:
        raise ScenarioError(f"override: {e}") from e


def _f17(x: float) -> str:
    return f"{x:.17g}"


def _json_float(x) -> float | None:
    x = float(x)
    return None if np.isnan(x) else x


def _write_trace_csv(trace: Trace, path: Path):
    n = trace.orientation_errors.shape[1]
    cols = ["t"]
    cols += [f"orient_err_{i}" for i in range(1, n + 1)]
    cols += [f"pos_err_{i}_{j}" for i, j in trace.error_edges]
    cols += ["V"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(len(trace.times)):
            row = [_f17(trace.times[k])]
            row += [_f17(x) for x in trace.orientation_errors[k]]
            row += [_f17(x) for x in trace.position_errors[k]]
            row.append(_f17(trace.lyapunov[k]))
            fh.write(",".join(row) + "\n")


def _write_state_csv(trace: Trace, path: Path):
    n = trace.truth.shape[1]
    blocks = [("T", "truth"), ("P", "aux"), ("S", "aligned"), ("That", "estimates")]
    cols = ["t", "agent"]
    for tag, _ in blocks:
        cols += [f"{tag}_{r}{c}" for r in range(4) for c in range(4)]
    cols += ["valid"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(len(trace.times)):
            for i in range(n):
                row = [_f17(trace.times[k]), str(i + 1)]
                for _, attr in blocks:
                    row += [_f17(x) for x in getattr(trace, attr)[k, i].ravel()]
                row.append("1" if trace.estimate_valid[k, i] else "0")
                fh.write(",".join(row) + "\n")


def _matrix_list(m: np.ndarray) -> list:
    return [[float(x) for x in row] for row in np.asarray(m)]


def _oracle_doc(report: OracleReport) -> dict:
    bias = None
    if report.transform_bias is not None:
        bias = {
            "rotation": _matrix_list(report.transform_bias.rotation.r),
            "translation": [float(x) for x in report.transform_bias.translation],
        }
    return {
        "w1": [float(x) for x in report.w1],
        "consensus_state": _matrix_list(report.consensus_state),
        "transform_bias": bias,
        "lambda2": report.lambda2,
        "settling_bound": report.settling_bound,
        "settling_bound_optimistic": report.settling_bound_optimistic,
        "v0": report.v0,
    }


def _summary_doc(s: Scenario, trace: Trace, report: OracleReport) -> dict:
    finite = isinstance(s.law, FiniteTime)
    with np.errstate(all="ignore"):
        final_orient = np.nanmax(trace.orientation_errors[-1]) if trace.orientation_errors.size else np.nan
        final_pos = np.nanmax(trace.position_errors[-1]) if trace.position_errors.size else np.nan
    return {
        "law": "finite" if finite else "asymptotic",
        "alpha": s.law.alpha if finite else None,
        "n": s.topo.n,
        "dt": s.dt,
        "t_end": s.t_end,
        "stride": s.stride,
        "seed": s.seed,
        "lambda2": report.lambda2,
        "w1": [float(x) for x in report.w1],
        "v0": report.v0,
        "settling_bound": report.settling_bound,
        "settling_bound_optimistic": report.settling_bound_optimistic,
        "settling_time": settling_time(trace) if finite else None,
        "final_time": float(trace.times[-1]),
        "final_max_orientation_error": _json_float(final_orient),
        "final_max_position_error": _json_float(final_pos),
    }


def _write_json(doc: dict, path: Path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_and_emit(cfg: RunConfig) -> int:
    """Run one scenario and write trace.csv / oracle.json / summary.json."""
    try:
        scenario = apply_overrides(load_scenario(cfg.scenario_path), cfg)
        trace, report = run(scenario)
    except (ScenarioError, ConfigurationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_trace_csv(trace, out / "trace.csv")
    _write_json(_oracle_doc(report), out / "oracle.json")
    _write_json(_summary_doc(scenario, trace, report), out / "summary.json")
    if cfg.full_state:
        _write_state_csv(trace, out / "state.csv")
    print(f"wrote {out / 'trace.csv'} ({len(trace.times)} samples)")
    return 0


def report(paths) -> int:
    """Print a comparison table for one or more summary.json files."""
    rows = []
    for p in paths:
        path = Path(p)
        if not path.exists():
            print(f"error: {path}: no such summary file", file=sys.stderr)
            return 1
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        rows.append((str(path), doc))

    def fmt(x, digits=4):
        if x is None:
            return "-"
        return f"{x:.{digits}g}"

    header = (
        f"{'run':<28} {'law':<10} {'alpha':>6} {'spectral':>10} {'V0':>10} "
        f"{'bound':>10} {'settling':>10} {'final_orient':>13} {'final_pos':>10}"
    )
    print(header)
    print("-" * len(header))
    for name, doc in rows:
        if doc.get("lambda2") is not None:
            spectral = fmt(doc["lambda2"])
        else:
            spectral = "w1:" + ",".join(f"{w:.2g}" for w in doc.get("w1", []))
        print(
            f"{Path(name).parent.name or name:<28} {doc['law']:<10} "
            f"{fmt(doc['alpha']):>6} {spectral:>10} {fmt(doc['v0']):>10} "
            f"{fmt(doc['settling_bound']):>10} {fmt(doc['settling_time']):>10} "
            f"{fmt(doc['final_max_orientation_error']):>13} "
            f"{fmt(doc['final_max_position_error']):>10}"
        )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="framelocal",
        description="Distributed frame-localization simulator on SE(3)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and emit trace/oracle/summary")
    p_run.add_argument("--config", required=True, help="scenario JSON path")
    p_run.add_argument("--law", choices=["asymptotic", "finite"])
    p_run.add_argument("--alpha", type=float)
    p_run.add_argument("--dt", type=float)
    p_run.add_argument("--t-end", type=float, dest="t_end")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--stride", type=int)
    p_run.add_argument("--mode", choices=["full", "twocol"])
    p_run.add_argument("--out", default=".", help="output directory (default: .)")
    p_run.add_argument("--full-state", action="store_true", help="also write state.csv")

    p_rep = sub.add_parser("report", help="tabulate one or more summary.json files")
    p_rep.add_argument("summaries", nargs="+", help="summary.json paths")

    args = parser.parse_args(argv)
    if args.command == "run":
        cfg = RunConfig(
            scenario_path=args.config,
            out_dir=args.out,
            law=args.law,
            alpha=args.alpha,
            dt=args.dt,
            t_end=args.t_end,
            seed=args.seed,
            stride=args.stride,
            mode=args.mode,
            full_state=args.full_state,
        )
        return run_and_emit(cfg)
    return report(args.summaries)


if __name__ == "__main__":
    sys.exit(main())
