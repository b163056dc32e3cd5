"""``esfd`` command line: run a sweep and write long-format CSV.

    esfd grad-diff --dim 100 --lambda-grid 10,100,1000 --objective linear \\
        --param offset=5 --theta origin --trials 200

Every command writes ``experiment,n,sigma,lambda,trials,seed,metric,value``
rows, one per metric per grid point, to stdout or ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import estimators as est
from .errors import UsageError
from .experiments import SweepPlan, ThetaSpec, derive_seed, run_plan
from .objectives import DEFAULT_PARAMS, FAMILIES, ObjectiveSpec, make_objective
from .sampling import SEED_MAX, mirror_batch, sample_batch
from .specfun import chi_mean, chi_variance, gamma_ratio_asymptotic, gamma_ratio_exact

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SELFTEST = 0, 2, 3, 4

HEADER = ("experiment", "n", "sigma", "lambda", "trials", "seed", "metric", "value")

COMMANDS = {
    "norm-stats": "norm-concentration",
    "gamma-check": None,
    "grad-diff": "difference-scaling",
    "converge-dim": "dimension-convergence",
    "shell": "sphere-shell",
    "optimize": "paired-optimization",
    "selftest": None,
}

# objective used when --objective is not given
DEFAULT_OBJECTIVE = "sphere"


@dataclass
class CliConfig:
    command: str
    dims: tuple = (100,)
    sigmas: tuple = (1.0,)
    lams: tuple = (100,)
    trials: int = 100
    seed: int = 42
    objective: str = DEFAULT_OBJECTIVE
    params: dict = field(default_factory=dict)
    theta: ThetaSpec = field(default_factory=ThetaSpec)
    normalize_es: bool = False
    mirrored: bool = False
    iterations: int = 2000
    step_size: float = 0.05
    checkpoints: int = 10
    threads: Optional[int] = None
    output: Optional[str] = None
    format: str = "csv"

    def plan(self) -> SweepPlan:
        spec = ObjectiveSpec(self.objective, self.dims[0], dict(self.params))
        return SweepPlan(
            experiment=COMMANDS[self.command],
            dims=self.dims,
            sigmas=self.sigmas,
            lams=self.lams,
            trials=self.trials,
            base_seed=self.seed,
            objective=spec,
            theta=self.theta,
            normalize_es=self.normalize_es,
            mirrored=self.mirrored,
            iterations=self.iterations,
            step_size=self.step_size,
            checkpoints=self.checkpoints,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(flag):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise UsageError(f"{flag}: expected a positive integer, got {text!r}") from None
        if value < 1:
            raise UsageError(f"{flag}: expected a positive integer, got {text!r}")
        return value
    return parse


def _positive_float(flag):
    def parse(text):
        try:
            value = float(text)
        except ValueError:
            raise UsageError(f"{flag}: expected a positive number, got {text!r}") from None
        if not value > 0 or not math.isfinite(value):
            raise UsageError(f"{flag}: expected a positive number, got {text!r}")
        return value
    return parse


def _grid(flag, item):
    def parse(text):
        parts = [p for p in text.split(",") if p.strip()]
        if not parts:
            raise UsageError(f"{flag}: empty list")
        return tuple(item(p.strip()) for p in parts)
    return parse


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise UsageError(f"--seed: expected an integer, got {text!r}") from None
    if not 0 <= value <= SEED_MAX:
        raise UsageError(f"--seed: must be in [0, 2**64), got {text!r}")
    return value


def _param(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise UsageError(f"--param: expected NAME=VALUE, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise UsageError(f"--param {key}: expected a number, got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="esfd", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    dims = p.add_mutually_exclusive_group()
    dims.add_argument("--dim", type=_positive_int("--dim"))
    dims.add_argument("--dim-grid", type=_grid("--dim-grid", _positive_int("--dim-grid")))
    sig = p.add_mutually_exclusive_group()
    sig.add_argument("--sigma", type=_positive_float("--sigma"))
    sig.add_argument("--sigma-grid", type=_grid("--sigma-grid", _positive_float("--sigma-grid")))
    lam = p.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lam", type=_positive_int("--lambda"))
    lam.add_argument("--lambda-grid", type=_grid("--lambda-grid", _positive_int("--lambda-grid")))
    p.add_argument("--trials", type=_positive_int("--trials"), default=100)
    p.add_argument("--seed", type=_seed, default=42)
    p.add_argument("--objective", choices=FAMILIES, default=DEFAULT_OBJECTIVE)
    p.add_argument("--param", type=_param, action="append", default=[],
                   help="objective parameter NAME=VALUE (repeatable)")
    p.add_argument("--theta", type=ThetaSpec.parse, default=ThetaSpec("ball", 1.0),
                   help="origin or ball:R (default ball:1)")
    p.add_argument("--normalize-es", action="store_true",
                   help="divide the ES estimate by sigma^2 (on by default for optimize)")
    p.add_argument("--mirrored", action="store_true", help="use antithetic batches")
    p.add_argument("--iterations", type=_positive_int("--iterations"), default=2000)
    p.add_argument("--step-size", type=_positive_float("--step-size"), default=0.05)
    p.add_argument("--checkpoints", type=_positive_int("--checkpoints"), default=10)
    p.add_argument("--threads", type=_positive_int("--threads"))
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv"], default="csv")
    return p


def parse_args(argv: Sequence[str]) -> CliConfig:
    """Parse and validate ``argv``; raises :class:`UsageError` on any bad flag."""
    ns = build_parser().parse_args(list(argv))
    params = dict(ns.param)
    unknown = set(params) - set(DEFAULT_PARAMS[ns.objective])
    if unknown:
        raise UsageError(f"--param: objective {ns.objective!r} has no parameter(s) {sorted(unknown)}")
    cfg = CliConfig(
        command=ns.command,
        dims=ns.dim_grid or ((ns.dim,) if ns.dim else (100,)),
        sigmas=ns.sigma_grid or ((ns.sigma,) if ns.sigma else (1.0,)),
        lams=ns.lambda_grid or ((ns.lam,) if ns.lam else (100,)),
        trials=ns.trials,
        seed=ns.seed,
        objective=ns.objective,
        params=params,
        theta=ns.theta,
        normalize_es=ns.normalize_es or ns.command == "optimize",
        mirrored=ns.mirrored,
        iterations=ns.iterations,
        step_size=ns.step_size,
        checkpoints=ns.checkpoints,
        threads=ns.threads,
        output=ns.out,
        format=ns.format,
    )
    if cfg.objective == "rosenbrock" and min(cfg.dims) < 2:
        raise UsageError("--objective rosenbrock needs every dimension >= 2")
    if COMMANDS[cfg.command] is not None:
        cfg.plan()  # validates the remaining combinations before any work
    return cfg


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def write_rows(rows, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(HEADER)
    for row in rows:
        writer.writerow([row[0], *(fmt(v) for v in row[1:6]), row[6], fmt(row[7])])


def record_rows(records):
    for r in records:
        for name, value in r.metrics.items():
            yield (r.experiment, r.n, r.sigma, r.lam, r.trials, r.seed, name, value)


def gamma_rows(cfg: CliConfig):
    """Exact vs first-order Gamma(z + 1/2) / Gamma(z) at z = n / 2."""
    for n in cfg.dims:
        z = n / 2.0
        exact = gamma_ratio_exact(z + 0.5, z)
        base = ("gamma-check", n, cfg.sigmas[0], cfg.lams[0], cfg.trials, cfg.seed)
        try:
            asym = gamma_ratio_asymptotic(z, 0.5, 0.0)
        except ValueError:
            asym = math.nan
        yield (*base, "exact_ratio", exact)
        yield (*base, "asymptotic_ratio", asym)
        yield (*base, "rel_error", abs(asym - exact) / exact)
        yield (*base, "chi_mean", chi_mean(n, cfg.sigmas[0]))
        yield (*base, "chi_variance", chi_variance(n, cfg.sigmas[0]))


def selftest_checks(seed: int = 42):
    """Closed-form and exact-identity checks: yields (name, error, tolerance)."""
    yield "chi_mean_n1", abs(chi_mean(1) / math.sqrt(2 / math.pi) - 1), 1e-12
    yield "chi_variance_n1", abs(chi_variance(1) / (1 - 2 / math.pi) - 1), 1e-12
    yield "chi_mean_n2", abs(chi_mean(2) / math.sqrt(math.pi / 2) - 1), 1e-12
    yield "gamma_shift_identity", abs(gamma_ratio_exact(8.0, 7.0) - 7.0) / 7.0, 1e-13
    yield "gamma_half", abs(gamma_ratio_exact(1.0, 0.5) * math.sqrt(math.pi) - 1), 1e-13
    yield "variance_limit_n1e6", abs(chi_variance(10**6) - 0.5), 1e-6

    worst = 0.0
    mirrored_es = 0.0
    for k, n in enumerate((2, 10, 100)):
        objective = make_objective(ObjectiveSpec("linear", n, {"offset": 3.0, "seed": k}))
        theta = ThetaSpec("ball", 1.0).point(n, derive_seed(seed, "selftest", n))
        batch = sample_batch(theta, 0.5, 20, derive_seed(seed, "selftest-batch", n))
        ev = est.evaluate_batch(batch, objective)
        e = est.estimate_all(batch, objective, evaluations=ev)
        closed = -ev.r_theta * est.perturbation_mean(batch)
        diff = e[est.EstimatorKind.CENTRAL_SUM].vector - e[est.EstimatorKind.ES].vector
        worst = max(worst, float(np.max(np.abs(diff - closed) / np.abs(closed))))
        flat = make_objective(ObjectiveSpec("constant", n, {"value": 7.0}))
        mirrored_es = max(mirrored_es, float(np.max(np.abs(est.es_gradient(mirror_batch(batch), flat).vector))))
    yield "difference_identity", worst, 1e-10
    yield "mirrored_constant_es_zero", mirrored_es, 0.0


def run(cfg: CliConfig, stream=None) -> int:
    """Execute a parsed command; returns the process exit code."""
    err = sys.stderr
    status = EXIT_OK
    try:
        if cfg.command == "gamma-check":
            rows = list(gamma_rows(cfg))
        elif cfg.command == "selftest":
            rows = []
            for name, error, tol in selftest_checks(cfg.seed):
                ok = error <= tol
                if not ok:
                    status = EXIT_SELFTEST
                    print(f"selftest FAIL {name}: error {error:.3e} > {tol:.1e}", file=err)
                rows.append(("selftest", 0, 0.0, 0, 0, cfg.seed, name, error))
        else:
            rows = list(record_rows(run_plan(cfg.plan(), threads=cfg.threads)))
    except UsageError as exc:
        print(f"esfd: error: {exc}", file=err)
        return EXIT_USAGE

    buf = io.StringIO()
    write_rows(rows, buf)
    try:
        if cfg.output:
            with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        else:
            out = stream if stream is not None else sys.stdout
            out.write(buf.getvalue())
            out.flush()
    except OSError as exc:
        print(f"esfd: cannot write output: {exc}", file=err)
        return EXIT_IO
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"esfd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
