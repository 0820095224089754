"""Scenario presets, sweeps over N, scaling fits, micro-vs-analytic comparison
and the command-line entry point.

Three platforms (circuit QED, microwave and optical resonators) are swept with
the high-temperature degenerate rate equation; the Rydberg presets drive the
microscopic injection simulator and are compared with the general coarse
coefficients.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy import stats

from . import coarse, microsim, prep
from .coarse import (CONSTANT_EXP, LINEAR_EXP, MICROSCOPIC, QUADRATIC_EXP, DecoherenceModel,
                     EngineParams)
from .cycle import evaluate_cycle
from .phaseonium import AtomSpec, CoherenceSpec, quasi_equilibrium_ratio, thermal_populations
from .qcore import FieldSpec, bose_einstein

CSV_HEADER = ("scenario", "N", "xi_model", "x", "lambda", "n_phi", "T_phi", "eta", "W", "source")
ANALYTIC, MICRO = "analytic", "microsim"
MICRO_N_CAP = 6
MICRO_NMAX_CAP = 15
QUASI_EQ_LIMIT = 1e-2


@dataclass(frozen=True)
class MicroSettings:
    tau: float
    tau0: float
    n_max: int = 15
    T_field: float = 1.0
    max_injections: int = 5000
    steps_per_stage: int = 2000
    dephasing_prefactor: float = 0.5

    @property
    def schedule(self) -> microsim.InjectionSchedule:
        return microsim.InjectionSchedule(self.tau, self.tau0)


@dataclass(frozen=True)
class Scenario:
    name: str
    params: EngineParams
    lam: float
    decoherence: DecoherenceModel
    N_range: tuple[int, ...]
    x_values: dict  # xi model -> tuple of x
    phi: float = np.pi
    analytic: str = "rate_equation"  # or "coefficients"
    micro: MicroSettings | None = None
    panels: dict = field(default_factory=dict)  # (model, "W"|"eta") -> x tuple

    def __post_init__(self):
        for f in fields(self.params):
            v = getattr(self.params, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"{self.name}: parameter {f.name} is not finite")
        if self.analytic not in ("rate_equation", "coefficients"):
            raise ValueError("analytic must be 'rate_equation' or 'coefficients'")

    def atom(self, N: int) -> AtomSpec:
        return AtomSpec(N)

    @property
    def coh(self) -> CoherenceSpec:
        return CoherenceSpec(lam=self.lam, phi=self.phi)

    def quasi_equilibrium_violations(self, limit: float = QUASI_EQ_LIMIT) -> dict[int, float]:
        """``{N: lambda N / P_g}`` for every N whose coherence is not small."""
        out = {}
        for N in self.N_range:
            q = quasi_equilibrium_ratio(self.atom(N), self.params.T_h, self.coh)
            if q > limit:
                out[N] = q
        return out


@dataclass(frozen=True)
class SweepRow:
    scenario: str
    N: int
    xi_model: str
    x: float
    lam: float
    n_phi: float
    T_phi: float
    eta: float
    W: float
    source: str
    error: str = ""

    def key(self):
        return (self.scenario, self.source, self.xi_model, self.x, self.N)

    def as_csv(self) -> list[str]:
        vals = [self.scenario, str(self.N), self.xi_model, repr(self.x), repr(self.lam)]
        vals += [repr(float(v)) for v in (self.n_phi, self.T_phi, self.eta, self.W)]
        return vals + [self.source]


# ---------------------------------------------------------------------------
# presets (platform values, scaled by the cavity frequency)

_CQED_X = {CONSTANT_EXP: (0.15, 0.1, 0.05, 0.001), LINEAR_EXP: (0.14, 0.12, 0.1, 0.08),
           QUADRATIC_EXP: (0.012, 0.01, 0.008, 0.006)}
_MICROWAVE_PANELS = {(CONSTANT_EXP, "W"): (0.1, 0.15, 0.05, 0.001), (CONSTANT_EXP, "eta"): (0.1, 0.15, 0.05, 0.001),
                (LINEAR_EXP, "W"): (0.12, 0.1, 0.08, 0.06), (LINEAR_EXP, "eta"): (0.14, 0.12, 0.1, 0.08),
                (QUADRATIC_EXP, "W"): (0.12, 0.1, 0.08, 0.06), (QUADRATIC_EXP, "eta"): (0.01, 0.008, 0.006, 0.004)}
_OPTICAL_X = {CONSTANT_EXP: (0.15, 0.1, 0.05, 0.001), LINEAR_EXP: (0.14, 0.12, 0.1, 0.08),
           QUADRATIC_EXP: (0.01, 0.008, 0.006, 0.004)}


def _panels_from(xmap):
    return {(m, q): xs for m, xs in xmap.items() for q in ("W", "eta")}


def _union(panels):
    out: dict = {}
    for (m, _), xs in panels.items():
        out[m] = tuple(sorted(set(out.get(m, ())) | set(xs), reverse=True))
    return out


RYDBERG_OMEGA = 51e9  # s^-1
RYDBERG_Q = 2e10


def _rydberg(name: str, N_ex: float) -> Scenario:
    W0 = RYDBERG_OMEGA
    kappa = 1.0 / RYDBERG_Q
    tau = 10e-6 * W0
    sch = microsim.InjectionSchedule.from_nex(N_ex, kappa, tau)
    params = EngineParams(g=5e4 / W0, r=sch.r, kappa=kappa, gamma=33.3 / W0, gamma_phi=3.3 / W0, T_h=2.0)
    return Scenario(name, params, 1e-3, DecoherenceModel(MICROSCOPIC, params.x), (2, 3, 4),
                    {MICROSCOPIC: (params.x,)}, analytic="coefficients",
                    micro=MicroSettings(tau=sch.tau, tau0=sch.tau0))


def _build_presets() -> dict[str, Scenario]:
    N_range = tuple(range(2, 41))
    f4 = _MICROWAVE_PANELS
    return {
        "circuit_qed": Scenario("circuit_qed", EngineParams(g=0.01, r=1e-4, kappa=6.25e-4, gamma=5e-6, T_h=4.0),
                                1e-6, DecoherenceModel(CONSTANT_EXP, 0.001), N_range, dict(_CQED_X),
                                panels=_panels_from(_CQED_X)),
        "microwave": Scenario("microwave", EngineParams(g=9.21e-7, r=6.47e-5, kappa=1.96e-8, gamma=9.54e-10, T_h=4.0),
                              1e-6, DecoherenceModel(CONSTANT_EXP, 0.001), N_range, _union(f4), panels=dict(f4)),
        "optical": Scenario("optical", EngineParams(g=6.28e-7, r=8e-5, kappa=2.86e-7, gamma=4.68e-8, T_h=4.0),
                            1e-6, DecoherenceModel(CONSTANT_EXP, 0.001), N_range, dict(_OPTICAL_X),
                            panels=_panels_from(_OPTICAL_X)),
        "rydberg": _rydberg("rydberg", 12e3),
        "rydberg_nex4000": _rydberg("rydberg_nex4000", 4000.0),
    }


PRESETS = _build_presets()


def load_scenario(spec: str) -> Scenario:
    """Preset name, or path to a JSON file ``{"base": <preset>, ...overrides}``.

    Recognised overrides: any ``EngineParams`` field, ``lam``, ``phi``,
    ``N_range``, ``x_values`` (model -> list) and ``name``.
    """
    if spec in PRESETS:
        return PRESETS[spec]
    path = Path(spec)
    if not path.is_file():
        raise KeyError(f"unknown scenario {spec!r}; presets: {', '.join(sorted(PRESETS))}")
    cfg = json.loads(path.read_text())
    base = PRESETS[cfg.pop("base", "circuit_qed")]
    pnames = {f.name for f in fields(EngineParams)}
    params = replace(base.params, **{k: float(cfg.pop(k)) for k in list(cfg) if k in pnames})
    kw = {}
    if "x_values" in cfg:
        kw["x_values"] = {m: tuple(float(x) for x in xs) for m, xs in cfg.pop("x_values").items()}
        kw["panels"] = _panels_from(kw["x_values"])
    if "N_range" in cfg:
        kw["N_range"] = tuple(int(n) for n in cfg.pop("N_range"))
    for k in ("lam", "phi"):
        if k in cfg:
            kw[k] = float(cfg.pop(k))
    kw["name"] = str(cfg.pop("name", path.stem))
    if cfg:
        raise ValueError(f"unrecognised scenario keys: {sorted(cfg)}")
    return replace(base, params=params, **kw)


# ---------------------------------------------------------------------------
# single points


def analytic_point(sc: Scenario, N: int, model: str, x: float) -> SweepRow:
    p = sc.params
    try:
        if sc.analytic == "rate_equation":
            xi = coarse.decoherence_factor(DecoherenceModel(model, x), N)
            eq = coarse.degenerate_rate_eq(p, N, xi, sc.lam)
            n_phi = eq.fixed_point
            T_phi = coarse.effective_temperature(n_phi)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                W, eta = coarse.high_T_work_eta(p, N, xi, sc.lam)
        else:
            pp = replace(p, gamma_phi=x * p.gamma)
            ss = coarse.steady_n_phi(coarse.coefficients(sc.atom(N), pp, sc.coh), pp)
            n_phi, T_phi = ss.n_phi, ss.T_phi
            cyc = evaluate_cycle(T_phi, p.T_c, n_phi, bose_einstein(p.T_c))
            W, eta = cyc.W_net, cyc.eta
    except (ValueError, ArithmeticError) as exc:
        nan = float("nan")
        return SweepRow(sc.name, N, model, x, sc.lam, nan, nan, nan, nan, ANALYTIC, str(exc))
    return SweepRow(sc.name, N, model, x, sc.lam, float(n_phi), float(T_phi), float(eta), float(W), ANALYTIC)


def micro_config(sc: Scenario, N: int, x: float | None = None, **overrides) -> microsim.SimConfig:
    if sc.micro is None:
        raise ValueError(f"scenario {sc.name!r} has no microsim settings")
    m = replace(sc.micro, **overrides)
    p = sc.params if x is None else replace(sc.params, gamma_phi=x * sc.params.gamma)
    return microsim.make_config(N, p, m.schedule, sc.lam, sc.phi, n_max=m.n_max, T_field=m.T_field,
                                max_injections=m.max_injections, steps_per_stage=m.steps_per_stage,
                                dephasing_prefactor=m.dephasing_prefactor)


def micro_point(sc: Scenario, N: int, x: float) -> tuple[SweepRow, microsim.SimTrace | None]:
    try:
        cfg = micro_config(sc, N, x)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            tr = microsim.run_sequence(cfg)
        T_eff, W, eta = microsim.observables(tr, cfg)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        nan = float("nan")
        return SweepRow(sc.name, N, MICROSCOPIC, x, sc.lam, nan, nan, nan, nan, MICRO, str(exc)), None
    return SweepRow(sc.name, N, MICROSCOPIC, x, sc.lam, tr.steady[0], T_eff, eta, W, MICRO), tr


def _run_point(args):
    sc, source, N, model, x = args
    if source == ANALYTIC:
        return analytic_point(sc, N, model, x)
    return micro_point(sc, N, x)[0]


# ---------------------------------------------------------------------------
# sweeps


def sweep_points(sc: Scenario, source: str = ANALYTIC, models=None, full: bool = False):
    if source == ANALYTIC:
        models = list(sc.x_values) if models is None else list(models)
        return [(sc, source, N, m, x) for m in models for x in sc.x_values[m] for N in sc.N_range]
    if source != MICRO:
        raise ValueError(f"unknown source {source!r}")
    if sc.micro is None:
        raise ValueError(f"scenario {sc.name!r} has no microsim settings")
    Ns = list(sc.N_range)
    if not full:
        Ns = [N for N in Ns if N <= MICRO_N_CAP]
        if sc.micro.n_max > MICRO_NMAX_CAP:
            sc = replace(sc, micro=replace(sc.micro, n_max=MICRO_NMAX_CAP))
    else:
        warnings.warn("full microsim sweep: runtime grows quickly with N and n_max", stacklevel=2)
    return [(sc, source, N, MICROSCOPIC, sc.params.x) for N in Ns]


def run_sweep(sc: Scenario, source: str = ANALYTIC, *, models=None, full: bool = False,
              workers: int = 1) -> list[SweepRow]:
    """Rows for every (N, model, x) point, sorted canonically."""
    pts = sweep_points(sc, source, models, full)
    if workers > 1 and len(pts) > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_run_point, pts))
    else:
        rows = [_run_point(p) for p in pts]
    return sorted(rows, key=SweepRow.key)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()


def read_rows(path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {rd.fieldnames}")
        out = []
        for d in rd:
            out.append(SweepRow(d["scenario"], int(d["N"]), d["xi_model"], float(d["x"]), float(d["lambda"]),
                                float(d["n_phi"]), float(d["T_phi"]), float(d["eta"]), float(d["W"]), d["source"]))
    return out


# ---------------------------------------------------------------------------
# scaling fit


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    stderr: float
    n_points: int
    prefactor: float


def loss_offset(params: EngineParams, N: int) -> float:
    """``n_bar kappa / 2 mu`` at the hot-bath temperature."""
    pe, pg = thermal_populations(AtomSpec(N), params.T_h)
    return pe / (pg[0] - pe) * params.kappa / (2 * params.mu)


def fit_scaling_exponent(rows, params: EngineParams | None = None, *, min_points: int = 5) -> ScalingFit:
    """Least-squares slope of ``log y`` against ``log N``.

    ``y = eta + n_bar kappa / 2 mu`` when ``params`` is given, else ``eta``.
    """
    N = np.array([r.N for r in rows], dtype=float)
    y = np.array([r.eta for r in rows], dtype=float)
    if params is not None:
        y = y + np.array([loss_offset(params, int(n)) for n in N])
    ok = np.isfinite(y) & (y > 0)
    if ok.sum() < min_points:
        raise ValueError(f"need >= {min_points} rows with positive fitted quantity, got {int(ok.sum())}")
    res = stats.linregress(np.log(N[ok]), np.log(y[ok]))
    return ScalingFit(float(res.slope), float(res.stderr), int(ok.sum()), float(np.exp(res.intercept)))


# ---------------------------------------------------------------------------
# comparison and preparation cost


@dataclass(frozen=True)
class ComparisonPoint:
    N: int
    micro: tuple[float, float, float]  # T_eff, W, eta
    analytic: tuple[float, float, float]
    rel: tuple[float, float, float]

    @property
    def passed(self) -> bool:
        return all(r < 0.05 for r in self.rel)


@dataclass(frozen=True)
class ComparisonReport:
    scenario: str
    points: tuple[ComparisonPoint, ...]

    @property
    def passed(self) -> bool:
        return bool(self.points) and all(p.passed for p in self.points)

    def lines(self) -> list[str]:
        out = [f"{'N':>3} {'quantity':>8} {'microsim':>12} {'analytic':>12} {'rel diff':>9}"]
        for p in self.points:
            for name, a, b, r in zip(("T_eff", "W", "eta"), p.micro, p.analytic, p.rel):
                out.append(f"{p.N:>3} {name:>8} {a:>12.5g} {b:>12.5g} {r:>9.2%}")
        out.append(f"{self.scenario}: {'PASS' if self.passed else 'FAIL'} (all relative differences < 5%)")
        return out


def _rel(a, b):
    if b == 0:
        return 0.0 if a == 0 else math.inf
    return abs(a - b) / abs(b)


def compare_rows(micro_rows, analytic_rows) -> ComparisonReport:
    amap = {(r.scenario, r.N): r for r in analytic_rows}
    pts = []
    name = ""
    for m in sorted(micro_rows, key=lambda r: r.N):
        name = m.scenario
        a = amap.get((m.scenario, m.N))
        if a is None:
            raise KeyError(f"no analytic counterpart for {m.scenario} N={m.N}")
        mv, av = (m.T_phi, m.W, m.eta), (a.T_phi, a.W, a.eta)
        pts.append(ComparisonPoint(m.N, mv, av, tuple(_rel(u, v) for u, v in zip(mv, av))))
    return ComparisonReport(name, tuple(pts))


def compare(sc: Scenario, *, full: bool = False) -> ComparisonReport:
    micro_rows = run_sweep(sc, MICRO, full=full)
    ana = [analytic_point(sc, r.N, MICROSCOPIC, r.x) for r in micro_rows]
    return compare_rows(micro_rows, ana)


DEFAULT_INV_TAU_GAMMA = 2.0
DEFAULT_ZETA = 0.5


def prep_cost(sc: Scenario, N: int, *, model: str | None = None, x: float | None = None,
              m: float | None = None) -> prep.PulseCost:
    """Second-law bookkeeping at one sweep point.

    ``m`` defaults to the microsim injection count to steady state for
    scenarios with microsim settings, else ``r * t_th``.
    """
    model = model or sc.decoherence.variant
    x = sc.decoherence.x if x is None else x
    if sc.micro is not None:
        row, tr = micro_point(sc, N, x)
        W = row.W
        if m is None:
            m = float(tr.steady[2]) if tr is not None and tr.steady else float(sc.micro.max_injections)
    else:
        row = analytic_point(sc, N, model, x)
        W = row.W
        if m is None:
            t_th = coarse.degenerate_rate_eq(sc.params, N, 1.0, 0.0).t_th
            m = prep.atoms_to_steady(sc.params.r, t_th)
    U_p = prep.pulse_energy_scaled(DEFAULT_INV_TAU_GAMMA, DEFAULT_ZETA)
    pulse = prep.PulseEnergy(float("nan"), float("nan"), float("nan"), float("nan"), U_p, float("nan"), np.pi)
    return prep.preparation_cost(N, m, W, pulse)


# ---------------------------------------------------------------------------
# CLI


def _write(text: str, out: str | None):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _note_quasi_equilibrium(sc: Scenario):
    for N, q in sc.quasi_equilibrium_violations().items():
        print(f"note: {sc.name} N={N}: lambda*N/P_g = {q:.3g} exceeds {QUASI_EQ_LIMIT:g}", file=sys.stderr)


def _report_failures(rows) -> int:
    bad = [r for r in rows if r.error]
    for r in bad:
        print(f"point failed: {r.scenario} N={r.N} {r.xi_model} x={r.x}: {r.error}", file=sys.stderr)
    return 2 if bad else 0


def _cmd_analytic(a) -> int:
    sc = load_scenario(a.scenario)
    _note_quasi_equilibrium(sc)
    models = None if a.xi == "all" else [a.xi]
    if models and models[0] not in sc.x_values:
        raise ValueError(f"scenario {sc.name} has no x values for model {a.xi}")
    rows = run_sweep(sc, ANALYTIC, models=models, workers=a.workers)
    _write(rows_to_csv(rows), a.out)
    return _report_failures(rows)


def _cmd_micro(a) -> int:
    sc = load_scenario(a.scenario)
    _note_quasi_equilibrium(sc)
    rows = run_sweep(sc, MICRO, full=a.full, workers=a.workers)
    _write(rows_to_csv(rows), a.out)
    return _report_failures(rows)


def _cmd_compare(a) -> int:
    sc = load_scenario(a.scenario)
    _note_quasi_equilibrium(sc)
    rep = compare(sc, full=a.full)
    print("\n".join(rep.lines()))
    return 0 if rep.passed else 2


def _cmd_prep(a) -> int:
    sc = load_scenario(a.scenario)
    try:
        c = prep_cost(sc, a.N)
    except prep.EngineNotOperatingError as exc:
        print(f"{sc.name} N={a.N}: {exc}")
        return 2
    print(f"scenario {sc.name}, N = {a.N}")
    for k, v in asdict(c).items():
        if k not in ("d", "E_p"):
            print(f"  {k:<7}= {v:.6g}")
    print(f"  second law {'respected' if c.margin > 1 else 'VIOLATED'} (U_ss/W = {c.margin:.3g})")
    return 0


def _cmd_fit(a) -> int:
    rows = [r for r in read_rows(a.input) if a.n_min <= r.N <= a.n_max]
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.scenario, r.source, r.xi_model, r.x), []).append(r)
    status = 0
    for (name, src, model, x), grp in sorted(groups.items()):
        params = PRESETS[name].params if (name in PRESETS and not a.raw) else None
        try:
            f = fit_scaling_exponent(grp, params)
            print(f"{name},{src},{model},{x!r}: exponent {f.exponent:.4f} +/- {f.stderr:.4f} ({f.n_points} points)")
        except ValueError as exc:
            print(f"{name},{src},{model},{x!r}: {exc}", file=sys.stderr)
            status = 2
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phaseonium-engine",
                                 description="Photonic Carnot engine with multilevel phaseonium fuel")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("analytic-sweep", help="coarse-grained sweep over N and x")
    s.add_argument("--scenario", required=True)
    s.add_argument("--xi", default="all", choices=["all", CONSTANT_EXP, LINEAR_EXP, QUADRATIC_EXP, MICROSCOPIC])
    s.add_argument("--out", default="-")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=_cmd_analytic)

    s = sub.add_parser("micro-sim", help="microscopic injection runs (desk scale unless --full)")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", default="-")
    s.add_argument("--full", action="store_true")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=_cmd_micro)

    s = sub.add_parser("compare", help="microsim vs analytic T_eff, W and eta")
    s.add_argument("--scenario", required=True)
    s.add_argument("--full", action="store_true")
    s.set_defaults(func=_cmd_compare)

    s = sub.add_parser("prep-cost", help="preparation energy against harvested work")
    s.add_argument("--scenario", required=True)
    s.add_argument("--N", type=int, required=True)
    s.set_defaults(func=_cmd_prep)

    s = sub.add_parser("fit", help="log-log scaling exponent of a sweep CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--n-min", type=int, default=10)
    s.add_argument("--n-max", type=int, default=10 ** 9)
    s.add_argument("--raw", action="store_true", help="fit eta itself, without the loss offset")
    s.set_defaults(func=_cmd_fit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
