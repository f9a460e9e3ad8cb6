"""End-to-end cost-driven learning runs and experiment sweeps."""

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib.resources import files
from typing import Optional

import numpy as np

from . import control_eval, diagnostics, latent_id, lqg, matstat, repr_learn, simulate
from .exceptions import ArgumentError, CorelError, RefusalError

METHODS = ("explicit", "implicit")
EVAL_MODES = ("analytic", "rollout")
DEFAULT_RANK_THRESHOLD = 0.3
DEFAULT_SIGMA_U = 0.2


@dataclass
class RunConfig:
    """Inputs of one learning run.

    ``H=None`` and ``d_x=None`` select the automatic rules
    (:func:`auto_history_length`, :func:`discover_latent_dim`).
    """

    T: int
    H: Optional[int] = None
    sigma_u: float = DEFAULT_SIGMA_U
    d_x: Optional[int] = None
    rank_threshold_ratio: float = DEFAULT_RANK_THRESHOLD
    method: str = "explicit"
    seed: int = 0
    eval: str = "analytic"
    T_eval: int = 100_000
    burn_in: Optional[int] = None
    model_path: Optional[str] = None
    parallel_regressions: bool = False

    def validate(self):
        if self.method not in METHODS:
            raise ArgumentError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.eval not in EVAL_MODES:
            raise ArgumentError(f"eval must be one of {EVAL_MODES}, got {self.eval!r}")
        if self.H is not None and self.H < 1:
            raise ArgumentError("H must be >= 1")
        if self.d_x is not None and not 0 < self.d_x < self.T:
            raise ArgumentError("need 0 < d_x < T")
        if self.T < 2:
            raise ArgumentError("T must be at least 2")
        if not 0.0 < self.rank_threshold_ratio < 1.0:
            raise ArgumentError("rank_threshold_ratio must lie in (0, 1)")
        if not self.sigma_u > 0:
            raise RefusalError("sigma_u must be positive: without excitation the dynamics are not identifiable")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass(eq=False)
class RunRecord:
    """Everything one run produced, or the reason it stopped.

    ``status`` is ``"ok"`` exactly when the full artifact set and both cost
    evaluations exist; otherwise ``failure`` names the stage and error.
    """

    config: RunConfig
    H_used: Optional[int] = None
    d_x_used: Optional[int] = None
    n_effective: Optional[int] = None
    representation: Optional[repr_learn.Representation] = None
    latent: Optional[latent_id.LatentModel] = None
    policy: Optional[control_eval.Policy] = None
    cosysid: Optional[dict] = None
    J_hat: Optional[float] = None
    J_star: Optional[float] = None
    gap: Optional[float] = None
    errors: dict = field(default_factory=dict)
    gram_min_eig: Optional[float] = None
    rank_flag: Optional[bool] = None
    timings: dict = field(default_factory=dict)
    failure: Optional[str] = None

    @property
    def status(self):
        return "ok" if self.failure is None else "failed"

    def to_dict(self, include_timings=True):
        out = {
            "config": self.config.to_dict(),
            "status": self.status,
            "failure": self.failure,
            "H_used": self.H_used,
            "d_x_used": self.d_x_used,
            "n_effective": self.n_effective,
            "gram_min_eig": self.gram_min_eig,
            "rank_flag": self.rank_flag,
            "J_hat": self.J_hat,
            "J_star": self.J_star,
            "gap": self.gap,
            "errors": dict(self.errors),
            "representation": None if self.representation is None else self.representation.to_dict(),
            "latent": None if self.latent is None else self.latent.to_dict(),
            "policy": None if self.policy is None else self.policy.to_dict(),
            "cosysid": self.cosysid,
        }
        if include_timings:
            out["timings"] = dict(self.timings)
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(
            config=RunConfig.from_dict(data["config"]),
            H_used=data.get("H_used"),
            d_x_used=data.get("d_x_used"),
            n_effective=data.get("n_effective"),
            representation=None if data.get("representation") is None
            else repr_learn.Representation.from_dict(data["representation"]),
            latent=None if data.get("latent") is None else latent_id.LatentModel.from_dict(data["latent"]),
            policy=None if data.get("policy") is None else control_eval.Policy.from_dict(data["policy"]),
            cosysid=data.get("cosysid"),
            J_hat=data.get("J_hat"),
            J_star=data.get("J_star"),
            gap=data.get("gap"),
            errors=dict(data.get("errors") or {}),
            gram_min_eig=data.get("gram_min_eig"),
            rank_flag=data.get("rank_flag"),
            timings=dict(data.get("timings") or {}),
            failure=data.get("failure"),
        )

    def to_json(self, include_timings=True):
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True, allow_nan=False)

    def summary(self):
        gap = "nan" if self.gap is None else f"{self.gap:.6g}"
        m_err = self.errors.get("M_err")
        m_err = "nan" if m_err is None else f"{m_err:.6g}"
        line = f"method={self.config.method} T={self.config.T} gap={gap} M_err={m_err}"
        if self.failure:
            line += f" status=failed ({self.failure})"
        return line


def reference_model_path():
    """Path of the bundled 2x2 reference model."""
    return str(files("corel_lqg") / "data" / "ref2x2.json")


def load_model(path):
    """Read a JSON model file; JSON syntax errors propagate with line/column."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ArgumentError("model file must hold a JSON object")
    return lqg.LqgModel.from_dict(data)


def auto_history_length(model, T):
    """``H = ceil(log T / (2 log(1/rho(A_bar))))``, at least 1.

    Chooses the truncation bias ``rho^H`` of the order of the statistical
    error ``T^{-1/2}``; longer histories inflate the quadratic regression's
    dimension without a matching gain at moderate ``T``.
    """
    rho = lqg.check_assumptions(model).rho_bar
    if not rho < 1.0:
        raise RefusalError("filter closed loop is not stable; no finite history suffices")
    if rho <= 0.0 or T <= 1:
        return 1
    return max(1, math.ceil(math.log(T) / (2.0 * math.log(1.0 / rho))))


def discover_latent_dim(traj, H, R, threshold_ratio, max_dim=None):
    """Rank discovery with a self-consistent cumulative-cost lookahead.

    The rank of the ``k``-step cumulative-cost quadratic form grows with
    ``k`` until it saturates at the latent dimension, so ``k`` is raised one
    step at a time until the discovered rank stops increasing.
    """
    d_h = H * (traj.ys.shape[1] + traj.us.shape[1])
    max_dim = d_h if max_dim is None else min(max_dim, d_h)
    prev = 0
    for k in range(1, max_dim + 1):
        data = simulate.build_histories(traj, H, k, R)
        fit = repr_learn.quadratic_regress(data.rep_histories, data.cbar)
        rank = repr_learn.discover_rank(matstat.sym_eig(fit.N_hat).values, threshold_ratio)
        if rank <= prev:
            return max(prev, 1)
        prev = rank
    return max(prev, 1)


def _stage_error(stage, exc):
    return f"{stage}: {type(exc).__name__}: {exc}"


@dataclass(eq=False)
class LearnedArtifacts:
    data: simulate.HistoryDataset
    fit: repr_learn.QuadFit
    representation: repr_learn.Representation
    latent: latent_id.LatentModel
    policy: control_eval.Policy
    trace: Optional[latent_id.CosysidTrace] = None


class _Progress:
    """Current stage name plus per-stage wall-clock timings."""

    def __init__(self, timings=None):
        self.stage = "setup"
        self.timings = {} if timings is None else timings
        self._start = None

    def enter(self, stage):
        now = time.perf_counter()
        if self._start is not None:
            self.timings[self.stage] = self.timings.get(self.stage, 0.0) + now - self._start
        self.stage, self._start = stage, now

    def close(self):
        self.enter(self.stage)
        self._start = None


def learn(traj, H, d_x, R, method="explicit", parallel_regressions=False, progress=None):
    """Learn representation, latent model and policy from ``(y, u, c)`` data only.

    Parameters
    ----------
    traj : Trajectory
        Observations, controls and costs; oracle fields are ignored.
    H, d_x : int
        History length and latent dimension (also the cost lookahead).
    R : ndarray
        Known control cost.
    method : {"explicit", "implicit"}
        Least-squares identification on encoded states, or the cost-only
        route with coordinate alignment.
    parallel_regressions : bool
        In implicit mode run the two decoupled cost regressions concurrently.
    """
    progress = progress or _Progress()
    progress.enter("histories")
    data = simulate.build_histories(traj, H, d_x, R)

    progress.enter("representation")
    fit1 = None
    if method == "implicit" and parallel_regressions:
        with ThreadPoolExecutor(max_workers=2) as pool:
            f0 = pool.submit(repr_learn.quadratic_regress, data.rep_histories, data.cbar)
            f1 = pool.submit(latent_id.next_cost_regression, data.hu, data.cbar_next)
            fit, fit1 = f0.result(), f1.result()
    else:
        fit = repr_learn.quadratic_regress(data.rep_histories, data.cbar)
    rep = repr_learn.factor_psd(fit.N_hat, d_x)
    z_hat = repr_learn.encode(rep.M_hat, data.hs)

    progress.enter("dynamics")
    trace = None
    if method == "explicit":
        A_hat, B_hat = latent_id.sysid_explicit(z_hat, data.us)
    elif method == "implicit":
        A_hat, B_hat, trace = latent_id.cosysid(data.hu, data.cbar_next, data.h_next, rep.M_hat,
                                                d_x, True, fit1)
    else:
        raise ArgumentError(f"unknown method {method!r}")

    progress.enter("cost")
    Q_hat, b_hat = latent_id.learn_cost(z_hat[:-1], data.us, data.cs, R)
    latent = latent_id.LatentModel(A_hat=A_hat, B_hat=B_hat, Q_hat=Q_hat, R=np.atleast_2d(R),
                                   b_hat=b_hat, method=method)

    progress.enter("planning")
    K_hat = control_eval.plan(latent)
    policy = control_eval.Policy(M=rep.M_hat, K=K_hat, H=H)
    return LearnedArtifacts(data=data, fit=fit, representation=rep, latent=latent, policy=policy,
                            trace=trace)


def run_corel(config, model, traj=None):
    """One pass of cost-driven representation learning, identification, planning and evaluation.

    Learning uses only the observation, control and cost streams of the
    rollout. The true model is consulted for the automatic history length,
    for evaluation, and for error reporting in normalized coordinates.
    ``traj`` may be supplied to reuse an existing rollout.

    Raises
    ------
    RefusalError
        If the configuration or the model violates a precondition
        (e.g. ``sigma_u = 0`` or a failed assumption check).
    """
    config.validate()
    report = lqg.check_assumptions(model)
    if not report.passed:
        raise RefusalError(f"model violates assumptions: {', '.join(report.failures())}")
    rec = RunRecord(config=config)
    progress = _Progress(rec.timings)
    try:
        H = config.H if config.H is not None else auto_history_length(model, config.T)
        rec.H_used = H
        data_rng = np.random.default_rng(config.seed)
        eval_rng = np.random.default_rng([config.seed, 1])

        if traj is None:
            progress.enter("simulate")
            traj = simulate.rollout_excite(model, config.T, H, config.sigma_u, data_rng)

        d_x = config.d_x
        if d_x is None:
            progress.enter("rank")
            d_x = discover_latent_dim(traj, H, model.R, config.rank_threshold_ratio)
        rec.d_x_used = d_x

        art = learn(traj, H, d_x, model.R, config.method, config.parallel_regressions, progress)
        rec.n_effective = art.data.n_rows
        rec.representation = art.representation
        rec.gram_min_eig = art.fit.gram_min_eig
        rec.rank_flag = art.fit.rank_flag
        rec.latent = art.latent
        rec.policy = art.policy
        if art.trace is not None:
            rec.cosysid = art.trace.to_dict()

        progress.enter("errors")
        rec.errors = _error_record(model, H, art.representation.M_hat, art.latent, art.policy.K,
                                   None if art.trace is None else art.trace.A_tilde)

        progress.enter("evaluation")
        rec.J_star = lqg.optimal_average_cost(model)
        if config.eval == "analytic":
            rec.J_hat = control_eval.evaluate_analytic(model, art.policy)
        else:
            rec.J_hat = control_eval.evaluate_rollout(model, art.policy, config.T_eval, eval_rng,
                                                      config.burn_in, config.sigma_u)
        rec.gap = rec.J_hat - rec.J_star
    except (CorelError, np.linalg.LinAlgError) as exc:
        rec.failure = _stage_error(progress.stage, exc)
        rec.gap = None
    finally:
        progress.close()
    return rec


def _error_record(model, H, M_hat, latent, K_hat, A_unaligned=None):
    normalized, _ = lqg.normalize_model(model)
    M_star = lqg.representation_matrix(normalized, H)
    errs = diagnostics.latent_errors(M_hat, latent.A_hat, latent.B_hat, latent.Q_hat, K_hat,
                                     normalized, M_star)
    if A_unaligned is not None and M_hat.shape == M_star.shape:
        errs["A_err_unaligned"] = diagnostics.misalignment_errors(
            latent.A_hat, A_unaligned, M_hat, normalized, M_star)[1]
    return {k: (None if v is None or not np.isfinite(v) else float(v)) for k, v in errs.items()}


def run_sweep(model, Ts, seeds, methods, base_config=None, threads=None):
    """Run the grid ``methods x Ts x seeds``; records come back sorted by key.

    Each cell draws its data from its own seed, so the result does not
    depend on the number of threads or on completion order. Failed cells
    keep their failure reason and the sweep continues.
    """
    Ts, seeds, methods = list(Ts), list(seeds), list(methods)
    if not Ts or not seeds or not methods:
        raise ArgumentError("sweep grids must be nonempty")
    base = base_config or RunConfig(T=Ts[0])
    keys = sorted((m, int(T), int(s)) for m in methods for T in Ts for s in seeds)

    def cell(key):
        method, T, seed = key
        cfg = RunConfig.from_dict({**base.to_dict(), "method": method, "T": T, "seed": seed})
        try:
            return run_corel(cfg, model)
        except CorelError as exc:
            return RunRecord(config=cfg, failure=_stage_error("setup", exc))

    workers = threads or os.cpu_count() or 1
    if workers == 1:
        return [cell(k) for k in keys]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(cell, keys))


SWEEP_COLUMNS = ("method", "T", "seed", "gap", "J_hat", "J_star", "M_err", "A_err", "B_err",
                 "Q_err", "K_err", "gram_min_eig", "d_x_used", "status")


def format_float(x):
    """17 significant digits (round-trips exactly); ``nan`` for missing."""
    if x is None or not np.isfinite(x):
        return "nan"
    return f"{float(x):.17g}"


def sweep_rows(records):
    rows = []
    for rec in sorted(records, key=lambda r: (r.config.method, r.config.T, r.config.seed)):
        e = rec.errors
        rows.append([
            rec.config.method, str(rec.config.T), str(rec.config.seed),
            format_float(rec.gap), format_float(rec.J_hat), format_float(rec.J_star),
            *(format_float(e.get(k)) for k in ("M_err", "A_err", "B_err", "Q_err", "K_err")),
            format_float(rec.gram_min_eig),
            "nan" if rec.d_x_used is None else str(rec.d_x_used),
            rec.status,
        ])
    return rows


def sweep_csv(records):
    lines = [",".join(SWEEP_COLUMNS)] + [",".join(r) for r in sweep_rows(records)]
    return "\n".join(lines) + "\n"


def median_by_T(records, key="gap"):
    """Median of a record field (or error metric) per ``T`` over ok records."""
    out = {}
    for rec in records:
        if rec.status != "ok":
            continue
        val = getattr(rec, key) if key in ("gap", "J_hat", "gram_min_eig") else rec.errors.get(key)
        if val is not None:
            out.setdefault(rec.config.T, []).append(val)
    return {T: float(np.median(v)) for T, v in sorted(out.items())}


__all__ = [
    "RunConfig", "RunRecord", "run_corel", "run_sweep", "load_model", "reference_model_path", "auto_history_length",
    "discover_latent_dim", "sweep_csv", "sweep_rows", "median_by_T", "SWEEP_COLUMNS",
]
