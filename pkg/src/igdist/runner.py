"""Experiment orchestration: subcommand pipelines, parallel mapping,
CSV/JSON persistence, and the run manifest.

Replicate work is partitioned by index, never by scheduling order, and
every randomized stage derives its own substream from the master seed,
so identical configs produce byte-identical result files at any worker
count.  Floats are serialized with repr (shortest round-trip form).
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .approx import WPools, build_approx_law, compare
from .bpsim import conditioned_w_pool, ghost_scaling, simulate, survival_prob
from .coincidence import SamplingScheme, poisson_check
from .config import ExperimentConfig
from .errors import ConfigError, ValidationError
from .graphgen import empirical_distance_law
from .model import derived_scalars, mean_matrices, perron, rank1_build
from .seeding import derive_seed

SUBCOMMANDS = (
    "spectral",
    "graph-dist",
    "bp",
    "coincidence",
    "approx",
    "compare",
    "rank1",
    "ghosts",
)


def parallel_map(fn, args_list, workers: int):
    """Map preserving argument order; worker count never affects results."""
    if workers <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    chunk = max(1, len(args_list) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args_list, chunksize=chunk))


def _fmt(x) -> str:
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


class RunWriter:
    """Collects output files and the manifest; removes partial output
    when a stage fails."""

    def __init__(self, out_dir: Path, config: ExperimentConfig, subcommand: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.seeds: dict[str, int] = {}
        self.config = config
        self.subcommand = subcommand
        self.started = datetime.now(timezone.utc).isoformat()

    def stage_seed(self, tag: str) -> int:
        seed = derive_seed(self.config.seed, f"stage:{tag}")
        self.seeds[tag] = seed
        return seed

    def write_csv(self, name: str, header: list[str], rows) -> Path:
        path = self.out_dir / name
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(x) for x in row))
        path.write_text("\n".join(lines) + "\n", newline="\n")
        self.files.append(path)
        return path

    def write_json(self, name: str, payload: dict) -> Path:
        path = self.out_dir / name
        path.write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", newline="\n"
        )
        self.files.append(path)
        return path

    def discard(self) -> None:
        for f in self.files:
            try:
                f.unlink()
            except OSError:
                pass

    def finish(self) -> Path:
        cfg_hash = hashlib.sha256(
            json.dumps(self.config.raw, sort_keys=True).encode()
        ).hexdigest()
        outputs = []
        for f in self.files:
            digest = hashlib.sha256(f.read_bytes()).hexdigest()
            outputs.append({"path": f.name, "sha256": digest})
        manifest = {
            "subcommand": self.subcommand,
            "config_hash": cfg_hash,
            "code_version": __version__,
            "seeds": self.seeds,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": outputs,
        }
        path = self.out_dir / "manifest.json"
        path.write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", newline="\n"
        )
        return path


def _default_horizon(cfg: ExperimentConfig, spec) -> int:
    if cfg.horizon is not None:
        return cfg.horizon
    return max(12, 2 * spec.i0)


def _spectral_payload(spec) -> dict:
    return {
        "tau": spec.tau,
        "lambda2_mod": spec.lambda2_mod,
        "gamma": spec.gamma,
        "theta": spec.theta,
        "zeta": spec.zeta,
        "zeta_star": spec.zeta_star,
        "Z_star": spec.Z_star,
        "frak_z": spec.frak_z,
        "kappa": spec.kappa,
        "kappa_printed": spec.kappa_printed,
        "rhoX": spec.rhoX,
        "rhoY": spec.rhoY,
        "i0": spec.i0,
        "phi_n": spec.phi_n,
        "e_mn": spec.e_mn,
        "u_mn": spec.u_mn,
        "n_total": spec.n_total,
        "m_total": spec.m_total,
        "mu": spec.mu.tolist(),
        "nu": spec.nu.tolist(),
        "mu_tilde": spec.mu_tilde.tolist(),
        "qX": spec.qX.tolist(),
        "qY": spec.qY.tolist(),
        "M_X": spec.M_X.tolist(),
        "M_Y": spec.M_Y.tolist(),
    }


def _run_spectral(cfg: ExperimentConfig, w: RunWriter) -> None:
    from .model import identity_report

    spec = derived_scalars(cfg.params)
    w.write_json("spectral.json", _spectral_payload(spec))
    rep = identity_report(spec)
    w.write_csv(
        "identities.csv",
        ["identity", "residual"],
        sorted(rep.items()),
    )


def _run_graph_dist(cfg: ExperimentConfig, w: RunWriter, workers: int) -> None:
    seed = w.stage_seed("graph-dist")
    law = empirical_distance_law(
        cfg.params, cfg.k1, cfg.k2, cfg.graph_reps, seed, workers=workers
    )
    w.write_csv("distances.csv", ["distance", "count"], law.to_rows())


def _pools(cfg: ExperimentConfig, w: RunWriter, spec) -> WPools:
    horizon = _default_horizon(cfg, spec)
    surv = survival_prob(cfg.params)
    pool_a = conditioned_w_pool(
        cfg.params, spec, cfg.k1, horizon, cfg.pool_size,
        w.stage_seed("pool-a"), cfg.population_cap,
    )
    pool_b = conditioned_w_pool(
        cfg.params, spec, cfg.k2, horizon, cfg.pool_size,
        w.stage_seed("pool-b"), cfg.population_cap,
    )
    pools = WPools(
        pool_a=pool_a,
        pool_b=pool_b,
        surv_a=float(surv[cfg.k1]),
        surv_b=float(surv[cfg.k2]),
        horizon=horizon,
    )
    w.write_csv("wpool_a.csv", ["value"], [(v,) for v in pool_a])
    w.write_csv("wpool_b.csv", ["value"], [(v,) for v in pool_b])
    w.write_csv(
        "survival.csv",
        ["type", "survival"],
        [(k + 1, float(surv[k])) for k in range(cfg.params.K)],
    )
    return pools


def _trajectory_rows(traj) -> list[tuple]:
    rows = []
    for i, x in enumerate(traj.X):
        for k, c in enumerate(x):
            rows.append((i, "X", k + 1, int(c)))
    for i, y in enumerate(traj.Y, start=1):
        for j, c in enumerate(y):
            rows.append((i, "Y", j + 1, int(c)))
    return rows


def _run_bp(cfg: ExperimentConfig, w: RunWriter, spec) -> None:
    horizon = _default_horizon(cfg, spec)
    seed = w.stage_seed("bp")
    traj = simulate(
        cfg.params, cfg.k1, horizon, derive_seed(seed, "trajectory", 0),
        cfg.population_cap,
    )
    w.write_csv(
        "trajectory.csv", ["generation", "side", "type", "count"],
        _trajectory_rows(traj),
    )
    sum_x = np.zeros((horizon + 1, cfg.params.K))
    sum_y = np.zeros((horizon, cfg.params.J))
    for r in range(cfg.bp_reps):
        t = simulate(
            cfg.params, cfg.k1, horizon, derive_seed(seed, "rep", r),
            cfg.population_cap,
        )
        sum_x += np.array(t.X)
        sum_y += np.array(t.Y)
    rows = []
    for i in range(horizon + 1):
        for k in range(cfg.params.K):
            rows.append((i, "X", k + 1, sum_x[i, k] / cfg.bp_reps))
    for i in range(horizon):
        for j in range(cfg.params.J):
            rows.append((i + 1, "Y", j + 1, sum_y[i, j] / cfg.bp_reps))
    w.write_csv(
        "trajectory_mean.csv", ["generation", "side", "type", "mean_count"], rows
    )
    _pools(cfg, w, spec)


def _scheme_from_dict(doc: dict) -> SamplingScheme:
    extra = set(doc) - {"w", "zA", "zB", "wstar"}
    if extra:
        raise ConfigError(f"unknown scheme keys: {sorted(extra)}")
    for key in ("w", "zA", "zB"):
        if key not in doc:
            raise ConfigError(f"scheme missing '{key}'")
    return SamplingScheme(
        w=doc["w"], draws_a=doc["zA"], draws_b=doc["zB"],
        excluded=doc.get("wstar"),
    )


def _coincidence_rows(schemes, seed: int) -> list[tuple]:
    rows = []
    for s in schemes:
        chk = poisson_check(s, seed=seed)
        rows.append(
            (
                ";".join(str(x) for x in s.w),
                ";".join("|".join(str(z) for z in d) for d in s.draws_a),
                ";".join("|".join(str(z) for z in d) for d in s.draws_b),
                ";".join(str(x) for x in s.excluded),
                chk.lam,
                chk.p_no_collision,
                chk.method,
                chk.poisson,
                chk.abs_diff,
                chk.bound,
                chk.mc_se,
                int(chk.passed),
            )
        )
    return rows


_COINCIDENCE_HEADER = [
    "w", "zA", "zB", "wstar", "lambda", "p_no_collision", "method",
    "poisson", "abs_diff", "bound", "mc_se", "pass",
]


def _run_coincidence(cfg: ExperimentConfig, w: RunWriter) -> None:
    seed = w.stage_seed("coincidence")
    if cfg.scheme is not None:
        schemes = [_scheme_from_dict(cfg.scheme)]
    else:
        schemes = []
        for w_l in range(2, 9):
            for za in range(1, min(3, w_l) + 1):
                for zb in range(1, min(3, w_l) + 1):
                    for ws in (0, 1):
                        schemes.append(
                            SamplingScheme(
                                w=[w_l], draws_a=[[za]], draws_b=[[zb]],
                                excluded=[ws],
                            )
                        )
    w.write_csv(
        "coincidence.csv", _COINCIDENCE_HEADER, _coincidence_rows(schemes, seed)
    )


def _run_approx(cfg: ExperimentConfig, w: RunWriter, spec) -> None:
    pools = _pools(cfg, w, spec)
    law = build_approx_law(spec, pools, range(-2, 4))
    rows = [(u, e) for u, e in zip(law.support, law.exceed)]
    rows.append(("inf", law.defect))
    w.write_csv("approx_law.csv", ["u", "exceed_prob"], rows)


def _run_compare(cfg: ExperimentConfig, w: RunWriter, spec, workers: int) -> None:
    seed = w.stage_seed("graph-dist")
    law = empirical_distance_law(
        cfg.params, cfg.k1, cfg.k2, cfg.graph_reps, seed, workers=workers
    )
    w.write_csv("distances.csv", ["distance", "count"], law.to_rows())
    if spec is None:
        # not supercritical: the branching approximation degenerates to
        # pure defect mass, so only the infinite-distance row is checkable
        surv = survival_prob(cfg.params)
        w.write_csv(
            "survival.csv",
            ["type", "survival"],
            [(k + 1, float(surv[k])) for k in range(cfg.params.K)],
        )
        defect = 1.0 - float(surv[cfg.k1]) * float(surv[cfg.k2])
        emp_inf = law.prob_infinite()
        w.write_csv(
            "compare.csv",
            ["u", "empirical_exceed", "approx_exceed", "abs_diff", "delta_scale"],
            [("inf", emp_inf, defect, abs(emp_inf - defect), math.nan)],
        )
        return
    pools = _pools(cfg, w, spec)
    alaw = build_approx_law(spec, pools, range(-2, 4))
    rows = [(u, e) for u, e in zip(alaw.support, alaw.exceed)]
    rows.append(("inf", alaw.defect))
    w.write_csv("approx_law.csv", ["u", "exceed_prob"], rows)
    table = compare(law, spec, pools, c25=cfg.c25)
    w.write_csv(
        "compare.csv",
        ["u", "empirical_exceed", "approx_exceed", "abs_diff", "delta_scale"],
        [
            (
                "inf" if math.isinf(r.u) else int(r.u),
                r.empirical_exceed,
                r.approx_exceed,
                r.abs_diff,
                r.delta_scale,
            )
            for r in table.rows
        ],
    )


def _run_rank1(cfg: ExperimentConfig, w: RunWriter) -> None:
    if cfg.rank1 is None:
        raise ConfigError("rank1 subcommand requires a 'rank1' config block")
    params, tau_cf, mu_cf, nu_cf = rank1_build(
        cfg.rank1, cfg.params.n, cfg.params.m
    )
    M_X, _ = mean_matrices(params)
    tau_pi, mu_pi, nu_pi = perron(M_X)
    rows = [("tau", tau_cf, tau_pi, abs(tau_cf - tau_pi) / tau_pi)]
    for k in range(params.K):
        rows.append(
            (
                f"mu_{k + 1}", mu_cf[k], mu_pi[k],
                abs(mu_cf[k] - mu_pi[k]) / abs(mu_pi[k]),
            )
        )
        rows.append(
            (
                f"nu_{k + 1}", nu_cf[k], nu_pi[k],
                abs(nu_cf[k] - nu_pi[k]) / abs(nu_pi[k]),
            )
        )
    w.write_csv(
        "rank1.csv", ["quantity", "closed_form", "power_iteration", "rel_diff"],
        rows,
    )


def _run_ghosts(cfg: ExperimentConfig, w: RunWriter, spec, workers: int) -> None:
    seed = w.stage_seed("ghosts")
    rows = ghost_scaling(
        cfg.params, spec, cfg.depth, cfg.bp_reps, seed,
        k1=cfg.k1, k2=cfg.k2, workers=workers,
    )
    w.write_csv(
        "ghosts.csv",
        ["i", "ghostX_mean", "ghostY_mean", "ratioX", "ratioY"],
        [
            (r["i"], r["ghostX_mean"], r["ghostY_mean"], r["ratioX"], r["ratioY"])
            for r in rows
        ],
    )


def run(
    subcommand: str,
    cfg: ExperimentConfig,
    out_dir=None,
    workers: int | None = None,
) -> Path:
    """Execute one subcommand pipeline; returns the output directory.

    Partial outputs are removed if any stage fails.
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    out = Path(out_dir) if out_dir is not None else Path(cfg.output_dir)
    workers = cfg.workers if workers is None else workers
    w = RunWriter(out, cfg, subcommand)
    needs_spec = subcommand in ("bp", "approx", "compare", "ghosts")
    try:
        spec = None
        if needs_spec:
            if subcommand == "compare":
                # compare degrades gracefully on non-supercritical models
                try:
                    spec = derived_scalars(cfg.params)
                except ValidationError:
                    spec = None
            else:
                spec = derived_scalars(cfg.params)
        if subcommand == "spectral":
            _run_spectral(cfg, w)
        elif subcommand == "graph-dist":
            _run_graph_dist(cfg, w, workers)
        elif subcommand == "bp":
            _run_bp(cfg, w, spec)
        elif subcommand == "coincidence":
            _run_coincidence(cfg, w)
        elif subcommand == "approx":
            _run_approx(cfg, w, spec)
        elif subcommand == "compare":
            _run_compare(cfg, w, spec, workers)
        elif subcommand == "rank1":
            _run_rank1(cfg, w)
        elif subcommand == "ghosts":
            _run_ghosts(cfg, w, spec, workers)
    except BaseException:
        w.discard()
        raise
    w.finish()
    return out
