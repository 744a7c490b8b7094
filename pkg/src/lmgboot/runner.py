"""Run configuration, orchestration and result tables."""
from __future__ import annotations

import csv
import io
import json
import os
import re
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bootstrap as bs
from . import measures as ms
from . import oracles
from .su2_rep import admissible_two_l, as_two_l, format_spin

MODES = ("bootstrap", "oracle-am", "oracle-ed", "compare", "toy")
MEASURES = ("concurrence", "tangle", "residual", "qfi", "entropy")
FORMATS = ("csv", "json")
THREADS_ENV = "LMGBOOT_THREADS"

EXIT_OK, EXIT_INVALID, EXIT_DIAGNOSTIC = 0, 2, 3


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass
class RunConfig:
    L: int
    gamma: float = 1.0
    hx: float = 0.0
    hz: float = 0.0
    sectors: str | list[int] = "all"  # "all" or a list of 2l values
    mode: str = "bootstrap"
    measures: tuple[str, ...] = MEASURES
    tolerances: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "csv"

    @property
    def params(self) -> tuple[float, float, float]:
        return (self.gamma, self.hx, self.hz)

    @property
    def two_ls(self) -> list[int]:
        return admissible_two_l(self.L) if self.sectors == "all" else list(self.sectors)

    def tol(self) -> bs.Tolerances:
        return bs.Tolerances(**self.tolerances)


_KEY_ALIASES = {
    "l": "L",
    "L": "L",
    "gamma": "gamma",
    "hx": "hx",
    "h_x": "hx",
    "hz": "hz",
    "h_z": "hz",
    "sectors": "sectors",
    "mode": "mode",
    "measures": "measures",
    "tau_null": "null",
    "tau_res": "residual",
    "tau_deg": "degeneracy",
    "output": "output",
    "out": "output",
    "format": "format",
}
_TOL_KEYS = {"null", "residual", "degeneracy"}


def parse_config_text(raw: str) -> dict:
    raw = raw.strip()
    if raw.startswith("{"):
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ConfigError([f"invalid JSON: {e.msg}"]) from None
        if not isinstance(data, dict):
            raise ConfigError(["JSON configuration must be an object"])
        return data
    out = {}
    # key=value tokens; values may be bracketed lists containing spaces
    for m in re.finditer(r"([^\s=#]+)\s*=\s*(\[[^\]]*\]|[^\s#]+)", raw):
        out[m.group(1)] = m.group(2)
    leftovers = re.sub(r"#[^\n]*", "", re.sub(r"([^\s=#]+)\s*=\s*(\[[^\]]*\]|[^\s#]+)", "", raw)).strip()
    if leftovers:
        raise ConfigError([f"cannot parse {leftovers.split()[0]!r} (expected key=value)"])
    return out


def _as_list(v) -> list:
    if isinstance(v, (list, tuple)):
        return list(v)
    s = str(v).strip()
    if s.startswith("["):
        s = s[1:-1]
    return [x.strip().strip("'\"") for x in s.split(",") if x.strip()]


def validate_config(raw: str | dict) -> RunConfig:
    """Parse key=value text or JSON into a RunConfig, listing every problem."""
    data = raw if isinstance(raw, dict) else parse_config_text(raw)
    problems: list[str] = []
    values: dict = {}
    tolerances: dict = {}
    for key, val in data.items():
        name = _KEY_ALIASES.get(key)
        if name is None:
            problems.append(f"unknown key {key!r}")
        elif name in _TOL_KEYS:
            tolerances[name] = val
        else:
            values[name] = val

    L = None
    if "L" not in values:
        problems.append("L is required")
    else:
        try:
            L = int(str(values["L"]))
            if L < 1:
                problems.append(f"L must be >= 1, got {L}")
                L = None
        except ValueError:
            problems.append(f"L must be an integer, got {values['L']!r}")

    cfg_kwargs: dict = {}
    for name in ("gamma", "hx", "hz"):
        if name in values:
            try:
                cfg_kwargs[name] = float(values[name])
                if not np.isfinite(cfg_kwargs[name]):
                    raise ValueError
            except (TypeError, ValueError):
                problems.append(f"{name} must be a finite real number, got {values[name]!r}")

    mode = str(values.get("mode", "bootstrap"))
    if mode not in MODES:
        problems.append(f"mode must be one of {', '.join(MODES)}, got {mode!r}")
    cfg_kwargs["mode"] = mode

    fmt = str(values.get("format", "csv")).lower()
    if fmt not in FORMATS:
        problems.append(f"format must be csv or json, got {fmt!r}")
    cfg_kwargs["format"] = fmt

    if "measures" in values and str(values["measures"]) != "all":
        chosen = _as_list(values["measures"])
        bad = [m for m in chosen if m not in MEASURES]
        if bad:
            problems.append(f"unknown measure(s) {', '.join(bad)}; choose from {', '.join(MEASURES)}")
        cfg_kwargs["measures"] = tuple(m for m in MEASURES if m in chosen)

    sectors = values.get("sectors", "all")
    if str(sectors) != "all":
        two_ls = []
        for item in _as_list(sectors):
            try:
                two_l = as_two_l(str(item))
            except (ValueError, ZeroDivisionError):
                problems.append(f"invalid sector label {item!r}")
                continue
            if L is not None and (two_l > L or (L - two_l) % 2):
                problems.append(f"sector l={format_spin(two_l)} is not admissible for L={L}")
            two_ls.append(two_l)
        cfg_kwargs["sectors"] = sorted(set(two_ls))
    for name, val in tolerances.items():
        try:
            tolerances[name] = float(val)
            if not tolerances[name] > 0:
                raise ValueError
        except (TypeError, ValueError):
            problems.append(f"tolerance {name} must be a positive number, got {val!r}")

    if "output" in values:
        cfg_kwargs["output"] = str(values["output"])
    if problems:
        raise ConfigError(problems)
    return RunConfig(L=L, tolerances=tolerances, **cfg_kwargs)


# Result rows ---------------------------------------------------------------

@dataclass
class ResultRow:
    E: float
    l: float | None
    cluster: int
    cluster_size: int
    degenerate: bool
    residual_commutator: float
    residual_eigen: float
    residual_symmetry: float
    C: float | None = None
    tau: float | None = None
    dtau: float | None = None
    S: float | None = None
    F_x: float | None = None
    F_y: float | None = None
    F_z: float | None = None
    F_sum: float | None = None
    F_max: float | None = None
    depth: int | None = None
    warnings: str = ""

    def rounded(self) -> "ResultRow":
        data = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float):
                if f.name not in _RESIDUALS and abs(v) < 1e-12:
                    v = 0.0  # roundoff in a measure that vanishes
                v = float(f"{v:.12g}") + 0.0  # drop negative zero
            data[f.name] = v
        return ResultRow(**data)


COLUMNS = [f.name for f in fields(ResultRow)]
_RESIDUALS = {"residual_commutator", "residual_eigen", "residual_symmetry"}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def rows_to_json(rows: list[ResultRow]) -> str:
    return json.dumps([asdict(r.rounded()) for r in rows], indent=1) + "\n"


def rows_from_json(text: str) -> list[ResultRow]:
    return [ResultRow(**d) for d in json.loads(text)]


def rows_from_csv(text: str) -> list[ResultRow]:
    types = {f.name: f.type for f in fields(ResultRow)}
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        data = {}
        for k, v in rec.items():
            t = str(types[k])
            if t == "str":
                data[k] = v
            elif v == "":
                data[k] = None
            elif t == "bool":
                data[k] = v == "1"
            elif "int" in t and "float" not in t:
                data[k] = int(v)
            else:
                data[k] = float(v)
        out.append(ResultRow(**data))
    return out


PLOT_COLUMNS = {
    "concurrence": ("C",),
    "tangle": ("tau",),
    "residual": ("dtau",),
    "entropy": ("S",),
    "qfi": ("F_max", "F_sum"),
}


def plot_tables(rows: list[ResultRow], chosen) -> dict[str, str]:
    """One (E, l, value) CSV per measure column, keyed by a file suffix."""
    out = {}
    for m in chosen:
        for col in PLOT_COLUMNS[m]:
            suffix = m if len(PLOT_COLUMNS[m]) == 1 else f"{m}_{col.split('_')[1]}"
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["E", "l", "value"])
            for r in rows:
                v = getattr(r, col)
                if v is not None:
                    w.writerow([_fmt(r.E), _fmt(r.l), _fmt(v)])
            out[suffix] = buf.getvalue()
    return out


# Orchestration -------------------------------------------------------------

def _fill_measures(row: ResultRow, report: ms.MeasureReport, chosen) -> None:
    if "concurrence" in chosen:
        row.C = report.concurrence
    if "tangle" in chosen:
        row.tau = report.tangle
    if "residual" in chosen:
        row.dtau = report.residual_tangle
    if "entropy" in chosen:
        row.S = report.entropy
    if "qfi" in chosen:
        q = report.qfi
        row.F_x, row.F_y, row.F_z = q.F_x, q.F_y, q.F_z
        row.F_sum, row.F_max, row.depth = q.F_sum, q.F_max, q.depth


def _join(*notes) -> str:
    seen = []
    for group in notes:
        for n in group:
            if n and n not in seen:
                seen.append(n)
    return ";".join(seen)


def bootstrap_rows(cfg: RunConfig, diagnostics: list[str]) -> tuple[list[ResultRow], dict]:
    engine = bs.engine_for(cfg.L, cfg.tol())
    h = bs.lmg_hamiltonian(cfg.L, *cfg.params)
    # build shared slices before any parallel sector solves
    engine.operator_rows(h)
    engine.operator_rows(bs.casimir())

    def solve(two_l):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", bs.WrongStateCount)
            sols = engine.solve(h, bs.casimir(), two_l)
        return sols, [str(w.message) for w in caught if issubclass(w.category, bs.WrongStateCount)]

    threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve, cfg.two_ls))
    else:
        results = [solve(t) for t in cfg.two_ls]

    rows, solutions = [], {}
    for two_l, (sols, notes) in zip(cfg.two_ls, results):
        diagnostics.extend(notes)
        solutions[two_l] = sols
        for s in sols:
            row = ResultRow(
                E=s.energy,
                l=two_l / 2,
                cluster=s.cluster,
                cluster_size=s.cluster_size,
                degenerate=s.degenerate,
                residual_commutator=s.residual_commutator,
                residual_eigen=s.residual_eigen,
                residual_symmetry=s.residual_symmetry,
            )
            notes_row = ["wrong_state_count"] if notes else []
            try:
                m = ms.moments_from_solution(s)
                rep = ms.measure_report(m, degenerate=s.degenerate)
                _fill_measures(row, rep, cfg.measures)
                notes_row += rep.warnings
            except ms.HermiticityViolated as e:
                notes_row.append("hermiticity_violated")
                diagnostics.append(f"l={format_spin(two_l)} E={s.energy:.6g}: {e}")
            row.warnings = _join(notes_row)
            rows.append(row)
    return rows, solutions


def oracle_am_rows(cfg: RunConfig) -> list[ResultRow]:
    rows = []
    for two_l in cfg.two_ls:
        block = oracles.angular_momentum_solve(cfg.L, cfg.params, Fraction(two_l, 2))
        tol = cfg.tol().degeneracy
        sizes = block.cluster_sizes(tol)
        cluster_ids = [cid for cid, mem in enumerate(block.clusters(tol)) for _ in mem]
        for E, m, size, cid in zip(block.energies, block.moments(tol), sizes, cluster_ids):
            row = ResultRow(float(E), two_l / 2, cid, size, size > 1, 0.0, 0.0, 0.0)
            rep = ms.measure_report(m, degenerate=size > 1)
            _fill_measures(row, rep, cfg.measures)
            row.warnings = _join(rep.warnings)
            rows.append(row)
    return rows


def oracle_ed_rows(cfg: RunConfig) -> list[ResultRow]:
    """Exact rows: C and tau from exact site reduced states, QFI from moments."""
    L = cfg.L
    rows = []
    wanted = set(cfg.two_ls)
    for st in oracles.dense_ed(L, cfg.params, rel_tol=cfg.tol().degeneracy):
        if st.two_l not in wanted:
            continue
        m = oracles.ed_moments(st, L)
        rep = ms.measure_report(m, degenerate=st.degenerate)
        rho1 = oracles.one_site_rdm(st.amplitudes, L, 0)
        tau = float(min(max(4 * np.linalg.det(rho1).real, 0.0), 1.0))
        notes = ["degenerate_cluster"] if st.degenerate else []
        row = ResultRow(st.energy, st.two_l / 2, 0, 1, st.degenerate, 0.0, 0.0, 0.0)
        _fill_measures(row, rep, cfg.measures)
        if L >= 2:
            pairs = [(1, j) for j in range(2, L + 1)]
            cs = oracles.site_resolved_concurrences(st.amplitudes, pairs, L)
            if "concurrence" in cfg.measures:
                row.C = float(cs[0])
            if "residual" in cfg.measures:
                row.dtau = tau - float(np.sum(cs**2))
        if "tangle" in cfg.measures:
            row.tau = tau
        if "entropy" in cfg.measures:
            row.S = ms.entropy_from_tangle(tau)
        row.warnings = _join(notes)
        rows.append(row)
    rows.sort(key=lambda r: (r.l, r.E))
    return rows


def toy_rows(cfg: RunConfig, diagnostics: list[str]) -> list[ResultRow]:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", bs.WrongStateCount)
        sols = bs.solve_toy_model(cfg.L, cfg.tol())
    diagnostics.extend(str(w.message) for w in caught if issubclass(w.category, bs.WrongStateCount))
    return [
        ResultRow(s.energy, None, s.cluster, s.cluster_size, s.degenerate,
                  s.residual_commutator, s.residual_eigen, s.residual_symmetry)
        for s in sols
    ]


@dataclass
class CompareSummary:
    max_energy_error: float
    max_moment_error: float
    count_mismatch: list[int]

    @property
    def ok(self) -> bool:
        return self.max_energy_error < 1e-8 and self.max_moment_error < 1e-6 and not self.count_mismatch


def compare(cfg: RunConfig, solutions: dict[int, list]) -> CompareSummary:
    dE = dM = 0.0
    mismatch = []
    for two_l, sols in solutions.items():
        block = oracles.angular_momentum_solve(cfg.L, cfg.params, Fraction(two_l, 2))
        if len(sols) != len(block.energies):
            mismatch.append(two_l)
            continue
        dE = max(dE, float(np.max(np.abs([s.energy for s in sols] - block.energies))))
        for s, mo in zip(sols, block.moments(cfg.tol().degeneracy)):
            mb = ms.moments_from_solution(s)
            dM = max(dM, float(np.max(np.abs(mb.first - mo.first))), float(np.max(np.abs(mb.second - mo.second))))
    return CompareSummary(dE, dM, mismatch)


@dataclass
class RunResult:
    rows: list[ResultRow]
    diagnostics: list[str]
    exit_code: int
    files: list[Path]
    summary: str
    comparison: CompareSummary | None = None


def trend_report(rows: list[ResultRow]) -> list[str]:
    """Soft checks of the qualitative spectrum-wide trends; returns messages."""
    msgs = []
    with_f = [r for r in rows if r.F_sum is not None]
    if with_f:
        Es = [r.E for r in rows]
        best = max(with_f, key=lambda r: r.F_sum)
        if not min(Es) < best.E < max(Es):
            msgs.append(f"max F_sum at spectrum edge (E={best.E:.6g})")
    with_c = [r for r in rows if r.C is not None]
    if with_c and rows:
        top = max(r.l for r in rows)
        best = max(with_c, key=lambda r: r.C)
        if best.l != top:
            msgs.append(f"max concurrence at l={best.l}, not at l={top}")
    return msgs


def run(cfg: RunConfig, out=None) -> RunResult:
    """Execute one configured run; write table and plot files if requested."""
    t0 = time.perf_counter()
    diagnostics: list[str] = []
    comparison = None
    if cfg.mode == "bootstrap":
        rows, _ = bootstrap_rows(cfg, diagnostics)
    elif cfg.mode == "compare":
        rows, sols = bootstrap_rows(cfg, diagnostics)
        comparison = compare(cfg, sols)
        if not comparison.ok:
            diagnostics.append(
                f"compare failed: max|dE|={comparison.max_energy_error:.3e}, "
                f"max|dmoment|={comparison.max_moment_error:.3e}"
            )
    elif cfg.mode == "oracle-am":
        rows = oracle_am_rows(cfg)
    elif cfg.mode == "oracle-ed":
        rows = oracle_ed_rows(cfg)
    else:
        rows = toy_rows(cfg, diagnostics)
    rows = [r.rounded() for r in rows]

    files = []
    if cfg.output:
        path = Path(cfg.output)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = rows_to_json(rows) if cfg.format == "json" else rows_to_csv(rows)
        path.write_text(text, encoding="utf-8")
        files.append(path)
        if cfg.mode != "toy":
            for suffix, body in plot_tables(rows, cfg.measures).items():
                p = path.with_name(f"{path.stem}.{suffix}.csv")
                p.write_text(body, encoding="utf-8")
                files.append(p)

    lines = [f"mode={cfg.mode} L={cfg.L} gamma={cfg.gamma:g} hx={cfg.hx:g} hz={cfg.hz:g}"]
    counts: dict = {}
    for r in rows:
        counts[r.l] = counts.get(r.l, 0) + 1
    for l, n in counts.items():
        label = "J_z basis" if l is None else f"sector l={format_spin(int(round(2 * l)))}"
        lines.append(f"  {label}: {n} states")
    if rows:
        res = max(max(r.residual_commutator, r.residual_eigen, r.residual_symmetry) for r in rows)
        lines.append(f"  max residual: {res:.3e}")
    if comparison is not None:
        lines.append(f"  max |E_bootstrap - E_oracle|: {comparison.max_energy_error:.3e}")
        lines.append(f"  max moment difference: {comparison.max_moment_error:.3e}")
    if "entropy" in cfg.measures and cfg.mode != "toy":
        lines.append("  entropy S in nats (natural log)")
    flagged = sorted({w for r in rows for w in r.warnings.split(";") if w})
    if flagged:
        lines.append(f"  row warnings: {', '.join(flagged)}")
    for d in diagnostics:
        lines.append(f"  diagnostic: {d}")
    lines.append(f"  wall time: {time.perf_counter() - t0:.3f} s")
    summary = "\n".join(lines)
    if out is not None:
        print(summary, file=out)
    code = EXIT_DIAGNOSTIC if diagnostics else EXIT_OK
    return RunResult(rows, diagnostics, code, files, summary, comparison)
