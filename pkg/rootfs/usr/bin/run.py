#!/usr/bin/env python3
"""threeflow command line: valid orientations of random 5-regular pairings.

Every subcommand writes a JSON run manifest (``--out``) holding its checks and results;
``--format csv`` additionally writes the sweep or table rows as CSV. Exit status is 0 when
every requested check passes, 1 when one fails, 2 on usage errors and 3 when a size cap
or retry budget stops the run.
"""
import argparse
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import conditioning
import exact_moments
import landscape
import orientations
import pairing_model
from errors import ManifestError, RetryExhaustedError, SizeCapError
from manifest import CheckResult, RunManifest, check, consolidate, normalise, write_csv
from seeding import derive_seed

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler(sys.stderr)],
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_CAP = 3

DEFAULT_OPTIONS_PATH = "/data/options.json"
OPTIONS_ENV = "THREEFLOW_OPTIONS"
DEFAULTS: Dict[str, Any] = {
    "seed": 20240601,
    "debug": False,
    "exact_count_cap": orientations.DEFAULT_EXACT_COUNT_CAP,
    "exact_moment_cap": exact_moments.DEFAULT_EXACT_MOMENT_CAP,
    "mc_joint_cap": conditioning.DEFAULT_MC_JOINT_CAP,
    "cycle_k_max": pairing_model.DEFAULT_CYCLE_K_MAX,
    "find_budget": orientations.DEFAULT_FIND_BUDGET,
    "restart_factor": orientations.DEFAULT_RESTART_FACTOR,
    "simple_max_attempts": 10000,
    "workers": 1,
    "out_dir": ".",
}

SSC_LIMIT = conditioning.SSC_LIMIT
RATIO_SWEEP = (50, 100, 200, 400)
RATIO_CHECK_MIN_N = RATIO_SWEEP[0]
RATIO_TOLERANCE = 0.02
LANDSCAPE_CHECKS = ("grad", "polys", "hessian", "spectrum", "maximize", "boundary")

CSV_HELP = """CSV columns:
  sample --trials N       k, mean, stderr, lambda_k
  moments --sweep ...     n, ratio, abs_error, first_moment_log10, second_moment_log10
  conditioning            k, lambda_k, mu_k, delta_k, mu_exact_n, mc_estimate, mc_stderr
  orient --trials N       graph, success, steps, restarts, best_potential
"""


class ThreeflowRunner:
    """Runs one subcommand and collects its checks into a RunManifest."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str]):
        self.args = args
        self.argv = list(argv)
        self.config = self._load_config(args.config)
        self._setup_logging()
        self.options = self._effective_options()
        self.seed = int(self.options["seed"])
        self.checks: List[CheckResult] = []
        self.results: Dict[str, Any] = {}
        self.table: Optional[Tuple[Sequence[str], List[Sequence[Any]]]] = None

    def _load_config(self, path: Optional[str]) -> Dict[str, Any]:
        """Load options from --config, $THREEFLOW_OPTIONS or /data/options.json."""
        path = path or os.environ.get(OPTIONS_ENV) or DEFAULT_OPTIONS_PATH
        try:
            with open(path, "r", encoding="utf-8-sig") as f:
                data = json.load(f)
        except FileNotFoundError:
            if path != DEFAULT_OPTIONS_PATH:
                logger.error(f"Configuration file {path} not found!")
            return {}
        except json.JSONDecodeError:
            logger.error(f"Invalid JSON in configuration file {path}!")
            return {}
        if not isinstance(data, dict):
            logger.error(f"Configuration file {path} must hold a JSON object")
            return {}
        for key in sorted(set(data) - set(DEFAULTS) - {"log_level"}):
            logger.debug(f"Ignoring unknown option {key!r}")
        return data

    def _setup_logging(self):
        """Configure logging based on user settings.

        Prefer the boolean 'debug' switch (or --debug); fallback to legacy 'log_level'.
        """
        level: int
        if self.args.debug:
            level = logging.DEBUG
        elif "debug" in self.config:
            level = logging.DEBUG if bool(self.config.get("debug")) else logging.INFO
        else:
            # Legacy support
            log_level = str(self.config.get("log_level", "info")).upper()
            level = getattr(logging, log_level, logging.INFO)

        root_logger = logging.getLogger()
        root_logger.setLevel(level)
        for h in root_logger.handlers:
            h.setLevel(level)
        logger.setLevel(level)

    def _effective_options(self) -> Dict[str, Any]:
        options = dict(DEFAULTS)
        options.update({k: v for k, v in self.config.items() if k in DEFAULTS})
        if self.args.seed is not None:
            options["seed"] = self.args.seed
        if getattr(self.args, "budget", None) is not None:
            options["find_budget"] = self.args.budget
        if self.args.workers is not None:
            options["workers"] = self.args.workers
        return options

    def record(self, result: CheckResult) -> CheckResult:
        self.checks.append(result)
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.value}")
        return result

    def say(self, text: str) -> None:
        print(text, file=sys.stdout)

    # --- subcommands -----------------------------------------------------------------

    def cmd_sample(self) -> None:
        args = self.args
        k_max = args.k_max or int(self.options["cycle_k_max"])
        if args.trials <= 1:
            if args.simple or args.connectivity:
                attempts = int(self.options["simple_max_attempts"])
                p = pairing_model.sample_simple_pairing(
                    args.n, derive_seed(self.seed, "sample"), attempts
                )
            else:
                p = pairing_model.sample_pairing(args.n, derive_seed(self.seed, "sample"))
            g = pairing_model.to_multigraph(p)
            counts = pairing_model.count_cycles(g, min(k_max, args.n))
            self.results = {
                "pairing": p.to_dict(),
                "simple": pairing_model.is_simple(g),
                "cycle_counts": list(counts.counts),
            }
            if args.connectivity:
                self.results["edge_connectivity"] = pairing_model.edge_connectivity(g)
                self.say(f"edge connectivity {self.results['edge_connectivity']}")
            self.say(f"cycle counts X_1..X_{counts.k_max}: {list(counts.counts)}")
            return

        k_stats = min(k_max, 2) if args.check else k_max
        stats = pairing_model.cycle_statistics(args.n, self.seed, args.trials, k_max=k_stats)
        hits, total = pairing_model.simple_acceptance(args.n, self.seed, args.trials)
        rate = hits / total
        rate_err = math.sqrt(rate * (1 - rate) / total) if 0 < rate < 1 else 1 / total
        self.results = {
            "cycle_means": {str(k): {"mean": m, "stderr": e} for k, (m, e) in stats.items()},
            "simple_rate": rate,
            "simple_rate_stderr": rate_err,
        }
        rows = []
        for k, (mean, err) in stats.items():
            target = float(conditioning.lambda_k(k))
            rows.append([k, mean, err, target])
            self.say(f"X_{k}: mean {mean:.6g} +/- {err:.3g} (limit {target:.6g})")
            if args.check and k <= 2:
                self.record(
                    check(
                        f"mean_X{k}",
                        mean,
                        target,
                        tolerance=3 * err,
                        claim=f"E X_{k} -> 4^{k}/{2 * k}",
                        evidence="monte-carlo",
                    )
                )
        self.say(f"P(simple): {rate:.6g} +/- {rate_err:.3g} (limit {math.exp(-6):.6g})")
        if args.check:
            self.record(
                check(
                    "simple_probability",
                    rate,
                    math.exp(-6),
                    tolerance=3 * rate_err,
                    claim="P(simple) -> exp(-lambda_1 - lambda_2) = e^-6",
                    evidence="monte-carlo",
                )
            )
        self.table = (("k", "mean", "stderr", "lambda_k"), rows)

    def cmd_orient(self) -> None:
        args = self.args
        trials = orientations.orient_trials(
            args.n,
            args.trials,
            self.seed,
            budget=int(self.options["find_budget"]),
            restart_after=int(self.options["restart_factor"]) * args.n,
            simple_attempts=int(self.options["simple_max_attempts"]) if args.simple else None,
            workers=int(self.options["workers"]),
        )
        certified = sum(t.certified for t in trials)
        self.results = {"graphs": args.trials, "certified": certified}
        self.table = (
            ("graph", "success", "steps", "restarts", "best_potential"),
            [t.row() for t in trials],
        )
        self.say(f"valid orientation found and certified on {certified}/{args.trials} graphs")
        self.record(
            check(
                "find_valid_success",
                certified,
                args.trials,
                claim="every sampled 5-regular graph has a valid orientation",
                evidence="heuristic search",
            )
        )

    def cmd_count(self) -> None:
        args = self.args
        cap = int(self.options["exact_count_cap"])
        if args.all_pairings:
            mean = orientations.mean_count_exact(pairing_model.enumerate_pairings(args.n))
            target = exact_moments.first_moment_exact(args.n)
            self.results = {"mean_count": mean}
            self.say(f"{mean.numerator}/{mean.denominator}")
            self.record(check("first_moment_brute", mean, target, claim="E Y (all pairings)"))
            return
        if args.trials > 1:
            mean, err = exact_moments.mc_first_moment(
                args.n, args.trials, self.seed, int(self.options["workers"])
            )
            target = float(exact_moments.first_moment_exact(args.n))
            self.results = {"mean": mean, "stderr": err, "exact": target}
            self.say(f"mean Y {mean:.12g} +/- {err:.3g}; exact {target:.12g}")
            self.record(
                check(
                    "first_moment_mc",
                    mean,
                    target,
                    tolerance=4 * err,
                    claim="sample mean of Y agrees with E Y",
                    evidence="monte-carlo",
                )
            )
            return
        if args.pairing:
            p = pairing_model.Pairing.from_json(Path(args.pairing).read_text(encoding="utf-8"))
        else:
            p = pairing_model.sample_pairing(args.n, derive_seed(self.seed, "count"))
        y = orientations.count_valid(p, cap)
        self.results = {"n": p.n, "count": y}
        self.say(str(y))
        if args.brute:
            brute = orientations.count_valid_brute(p)
            self.record(check("count_matches_brute_force", y, brute, claim="backtracking count"))

    def cmd_moments(self) -> None:
        args = self.args
        workers = int(self.options["workers"])
        if args.resolve:
            reading = exact_moments.resolve_second_moment_reading(2)
            self.results["sum_over_I_reading"] = reading
            self.say(f"sum over I(2) equals {reading}")
            self.record(
                check(
                    "second_moment_reading",
                    reading,
                    exact_moments.SUM_OVER_I_ESTIMATES,
                    claim="which moment the sum over I computes (n = 2 brute force)",
                )
            )
        if args.sweep is not None:
            self._moment_sweep(args.sweep or RATIO_SWEEP, workers)
            return
        n = args.n
        quantities = [args.which] if args.which else list(exact_moments.MOMENT_QUANTITIES)
        cap = int(self.options["exact_moment_cap"])
        values = {
            which: exact_moments.moment_value(n, which, args.mode, cap=cap, workers=workers)
            for which in quantities
        }
        self.results["moments"] = {which: v.to_dict() for which, v in values.items()}
        for v in values.values():
            self._report_moment(v)
        if args.mode == "exact" and "second" in values:
            self._exact_moment_checks(n, values, workers)
        if args.mp:
            mp_value = exact_moments.second_moment_mp(n)
            log_value = exact_moments.second_moment_log(n, workers)
            relative = abs(float(mp_value) / log_value.to_float() - 1)
            self.record(
                check(
                    "mpmath_agreement",
                    relative,
                    0.0,
                    tolerance=1e-9,
                    claim="128-bit mpmath sum agrees with log-space sum",
                )
            )

    def _report_moment(self, v: exact_moments.MomentValue) -> None:
        if v.which == "ratio":
            ratio = v.value.to_float()
            self.say(f"E Y^2 / (E Y)^2 at n={v.n}: {ratio:.12g}")
            if v.n < RATIO_CHECK_MIN_N:
                logger.info(f"ratio is checked against 5/sqrt(21) from n={RATIO_CHECK_MIN_N} on")
                return
            self.record(
                check(
                    "ratio",
                    ratio,
                    SSC_LIMIT,
                    tolerance=RATIO_TOLERANCE * SSC_LIMIT,
                    claim="E Y^2/(E Y)^2 -> 5/sqrt(21)",
                    evidence=f"{v.mode} arithmetic, n={v.n}",
                )
            )
            return
        label = "E Y" if v.which == "first" else "E Y^2"
        if v.rational is not None:
            name = "E Y" if v.which == "first" else f"sum over I({v.n})"
            self.say(f"{name} = {v.rational}")
        else:
            self.say(f"log10 {label} at n={v.n}: {v.value.log10:.12g}")
        logger.info(f"{label} at n={v.n}: relative distance {v.rel_err:.3g} to its asymptotic form")

    def _exact_moment_checks(
        self, n: int, values: Dict[str, exact_moments.MomentValue], workers: int
    ) -> None:
        second = values["second"].rational
        if n == 2:
            brute = exact_moments.brute_force_moments(2)
            if "first" in values:
                first = values["first"].rational
                self.record(check("first_moment_n2", first, brute["E[Y]"], claim="E Y at n = 2"))
            self.record(
                check(
                    "second_moment_n2",
                    second,
                    brute[exact_moments.SUM_OVER_I_ESTIMATES],
                    claim="sum over I(2) equals the brute-force second moment",
                )
            )
        log_second = exact_moments.second_moment_log(n, workers)
        self.record(
            check(
                "log_space_agreement",
                log_second.log_abs,
                exact_moments.LogNumber.from_value(second).log_abs,
                tolerance=1e-9,
                claim="log-space second moment agrees with exact rationals",
            )
        )

    def _moment_sweep(self, ns: Sequence[int], workers: int) -> None:
        rows = []
        errors = []
        for n in ns:
            first = exact_moments.first_moment_log(n)
            second = exact_moments.second_moment_log(n, workers)
            ratio = exact_moments.moment_ratio(n, "log", workers)
            error = abs(ratio - SSC_LIMIT)
            errors.append(error)
            rows.append([n, ratio, error, first.log10, second.log10])
            self.say(f"n={n}: ratio {ratio:.12g}, |ratio - 5/sqrt(21)| {error:.3g}")
        self.results["sweep"] = [dict(zip(("n", "ratio", "abs_error"), r[:3])) for r in rows]
        self.table = (
            ("n", "ratio", "abs_error", "first_moment_log10", "second_moment_log10"),
            rows,
        )
        decreasing = all(b < a for a, b in zip(errors, errors[1:]))
        self.record(
            check(
                "ratio_errors_decrease",
                decreasing,
                True,
                claim="E Y^2/(E Y)^2 approaches 5/sqrt(21) monotonically along the sweep",
            )
        )
        last = rows[-1][1]
        self.record(
            check(
                "ratio_limit",
                last,
                SSC_LIMIT,
                tolerance=RATIO_TOLERANCE * SSC_LIMIT,
                claim="E Y^2/(E Y)^2 -> 5/sqrt(21)",
                evidence="log-space",
            )
        )

    def cmd_landscape(self) -> None:
        args = self.args
        selected = args.check or list(LANDSCAPE_CHECKS)
        handlers: Dict[str, Callable[[], None]] = {
            "grad": self._landscape_grad,
            "polys": self._landscape_polys,
            "hessian": self._landscape_hessian,
            "spectrum": self._landscape_spectrum,
            "maximize": self._landscape_maximize,
            "boundary": self._landscape_boundary,
        }
        for name in selected:
            handlers[name]()

    def _landscape_grad(self) -> None:
        grad = landscape.grad_f(landscape.Z_TILDE)
        self.results["grad_at_max"] = list(grad)
        self.record(
            check(
                "grad_at_max",
                float(max(abs(grad))),
                0.0,
                tolerance=1e-10,
                claim="z~ = (1/4, 1/20, 1/20, 1/20, 1/20) is stationary",
            )
        )
        worst = landscape.gradient_check(self.args.points, derive_seed(self.seed, "grad"))
        self.record(
            check(
                "grad_finite_differences",
                worst,
                0.0,
                tolerance=1e-6,
                claim="analytic gradient matches central differences",
            )
        )

    def _landscape_polys(self) -> None:
        polys = landscape.stationary_polys(landscape.Z_TILDE)
        self.results["stationary_polys_at_max"] = polys
        self.record(
            check(
                "stationary_polys_vanish",
                max(abs(v) for v in polys.values()),
                0.0,
                tolerance=1e-12,
                claim="all five stationary polynomials vanish at z~",
            )
        )
        self.record(
            check("p6_at_max", landscape.p6_of(landscape.Z_TILDE), 0.0, tolerance=1e-12)
        )
        self.record(
            check("p7_root_at_max", landscape.p7_of(0.25, 0.05), 0.0, tolerance=1e-12)
        )

    def _landscape_hessian(self) -> None:
        b = landscape.hessian_at(landscape.Z_TILDE)
        printed = [[float(v) for v in row] for row in landscape.B_EXACT]
        self.results["hessian_at_max"] = b.matrix.tolist()
        self.record(
            check(
                "hessian_matches_printed",
                b.max_deviation_from(printed),
                0.0,
                tolerance=1e-6,
                claim="B = (1/10) x printed integer matrix",
            )
        )
        self.record(check("hessian_symmetric", b.asymmetry, 0.0, tolerance=1e-8))

    def _landscape_spectrum(self) -> None:
        spectrum = landscape.spectrum_B()
        self.results["spectrum"] = spectrum.to_dict()
        self.say("eigenvalues: " + ", ".join(f"{v:.12g}" for v in spectrum.eigenvalues))
        self.say(f"det B = {spectrum.determinant}")
        deviation = max(
            abs(a - b) for a, b in zip(spectrum.eigenvalues, landscape.EIGENVALUES_CLOSED)
        )
        self.record(
            check(
                "eigenvalues",
                deviation,
                0.0,
                tolerance=1e-8,
                claim="eigenvalues (-37 +/- sqrt 697)/4 and -25/2 three times",
            )
        )
        self.record(
            check(
                "determinant",
                spectrum.determinant,
                Fraction(-328125, 4),
                claim="det B = -3 5^6 7 / 4",
            )
        )
        self.record(
            check("negative_definite", max(spectrum.eigenvalues) < -2.6, True, claim="all < -2.6")
        )
        coefficient = landscape.laplace_coefficient()
        self.results["laplace_coefficient"] = coefficient
        self.record(
            check(
                "laplace_coefficient",
                coefficient,
                25 / math.sqrt(21),
                tolerance=1e-10 * 25 / math.sqrt(21),
                claim="g(z~)(pi n)^(5/2)/sqrt|det B| = 25/sqrt(21)",
            )
        )

    def _landscape_maximize(self) -> None:
        found = landscape.maximize_f(self.args.starts, seed=derive_seed(self.seed, "maximize"))
        best = found.best
        self.results["maxima"] = found.to_dict()
        distance = max(abs(a - b) for a, b in zip(best.point, landscape.Z_TILDE))
        self.say(f"best maximum {best.value:.12g} at {tuple(round(v, 9) for v in best.point)}")
        self.record(
            check("argmax", distance, 0.0, tolerance=1e-6, claim="global maximum at z~")
        )
        self.record(
            check(
                "max_value",
                best.value,
                landscape.LOG_25_8,
                tolerance=1e-9,
                claim="f(z~) = log(25/8)",
            )
        )
        self.record(
            check(
                "reported_values_below_max",
                found.highest_reported <= landscape.LOG_25_8 + 1e-6,
                True,
                claim="no interior maximum or boundary candidate exceeds log(25/8)",
                evidence="numeric",
            )
        )
        scanned = landscape.max_f_on_sample(self.args.samples, derive_seed(self.seed, "scan"))
        self.results["sample_scan_max"] = scanned
        self.record(
            check(
                "no_sample_above_max",
                scanned <= landscape.LOG_25_8 + 1e-9,
                True,
                claim=f"{self.args.samples} uniform points of J stay below log(25/8)",
                evidence="sampling",
            )
        )

    def _landscape_boundary(self) -> None:
        candidates = landscape.boundary_report()
        self.results["boundary"] = [c.to_dict() for c in candidates]
        for c in candidates:
            self.record(
                check(
                    f"boundary {c.name}",
                    c.computed_value,
                    landscape.LOG_25_8,
                    claim="boundary local maximum lies strictly below log(25/8)",
                    printed=c.printed_value,
                    passed=c.below_maximum,
                    notes=c.notes,
                )
            )
        (a, c), value = landscape.f_bar_maximize(seed=derive_seed(self.seed, "f_bar"))
        diagonal = landscape.diagonal_scan()
        self.results["f_bar_max"] = {"point": [a, c], "value": value}
        self.results["f_bar_diagonal_stationary"] = [list(d) for d in diagonal]
        self.record(
            check(
                "face_maximum_below_max",
                value < landscape.LOG_25_8,
                True,
                claim="f on the faces z = 0 and z = 1/2 stays below log(25/8)",
                evidence="numeric",
                notes=[f"max f_bar {value:.12g} at ({a:.9g}, {c:.9g})"],
            )
        )

    def cmd_conditioning(self) -> None:
        args = self.args
        k_max = args.k_max or int(self.options["cycle_k_max"])
        workers = int(self.options["workers"])
        if args.series:
            value = conditioning.ssc_constant(k_max)
            self.results["ssc_constant"] = value
            self.say(f"{value:.12g}")
            self.record(
                check(
                    "ssc_constant",
                    value,
                    SSC_LIMIT,
                    tolerance=max((4 / 25) ** k_max, 1e-12),
                    claim="exp(sum lambda_k delta_k^2) = 5/sqrt(21)",
                )
            )
            return
        n = args.exact_n if args.exact_n is not None else args.n
        trials = args.trials if args.mc else 0
        table = conditioning.cycle_moment_table(
            k_max,
            n=n if (args.mc or args.exact_n is not None) else None,
            trials=trials,
            seed=derive_seed(self.seed, "conditioning"),
            cap=int(self.options["mc_joint_cap"]),
            workers=workers,
        )
        self.results["table"] = table.to_dict()
        self.table = (table.COLUMNS, table.csv_rows())
        for row in table.rows:
            self.say(
                f"k={row.k}: lambda {row.lambda_k}, mu {row.mu_k}, delta {row.delta_k}"
                + (f", mc {row.mc.estimate:.6g} +/- {row.mc.stderr:.3g}" if row.mc else "")
            )
            if row.mc is not None and row.k <= 2:
                self.record(
                    check(
                        f"joint_moment_k{row.k}",
                        row.mc.within_tolerance(),
                        True,
                        claim=f"E(Y X_{row.k})/E Y -> mu_{row.k}",
                        evidence="monte-carlo",
                        notes=[
                            f"estimate {row.mc.estimate:.6g} +/- {row.mc.stderr:.3g}, "
                            f"finite-n exact {float(row.mu_exact_n):.6g}"
                        ],
                    )
                )

    # --- driver ----------------------------------------------------------------------

    def run(self) -> int:
        started = datetime.now(timezone.utc)
        handler = getattr(self, f"cmd_{self.args.command}")
        handler()
        manifest = RunManifest(
            command=self.argv,
            subcommand=self.args.command,
            seed=self.seed,
            options=normalise({k: v for k, v in self.options.items() if k != "out_dir"}),
            checks=self.checks,
            results=self.results,
        ).seal(started)
        out = self.args.out
        if out:
            manifest.write(out)
            if self.args.format == "csv" and self.table:
                write_csv(Path(out).with_suffix(".csv"), *self.table)
        elif self.args.format == "csv" and self.table:
            columns, rows = self.table
            self.say(",".join(columns))
            for row in rows:
                self.say(",".join("" if v is None else str(normalise(v)) for v in row))
        return EXIT_OK if manifest.passed else EXIT_CHECK_FAILED


def _even_n(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if n < 2 or n % 2:
        raise argparse.ArgumentTypeError(f"n must be an even integer >= 2, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (option: seed)")
    common.add_argument("--out", default=None, help="write the JSON run manifest here")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--config", default=None, help=f"options file (env {OPTIONS_ENV})")
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--debug", action="store_true")

    parser = argparse.ArgumentParser(
        prog="threeflow",
        description="Valid orientations (in-degree 1 or 4) of random 5-regular pairings.",
        epilog=CSV_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="sample pairings, count short cycles")
    p.add_argument("--n", type=_even_n, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--simple", action="store_true", help="reject until the graph is simple")
    p.add_argument("--connectivity", action="store_true", help="report edge connectivity")
    p.add_argument("--check", action="store_true", help="test X_1, X_2 and P(simple) limits")

    p = sub.add_parser("orient", parents=[common], help="find valid orientations")
    p.add_argument("--n", type=_even_n, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--simple", action="store_true")

    p = sub.add_parser("count", parents=[common], help="count valid orientations exactly")
    p.add_argument("--n", type=_even_n, default=2)
    p.add_argument("--all-pairings", action="store_true", help="exact mean over every pairing")
    p.add_argument("--trials", type=int, default=1, help="Monte Carlo mean of Y over trials")
    p.add_argument("--pairing", default=None, help="pairing JSON file to count")
    p.add_argument("--brute", action="store_true", help="cross-check by full enumeration")

    p = sub.add_parser("moments", parents=[common], help="first and second moments of Y")
    p.add_argument("--n", type=_even_n, default=2)
    p.add_argument("--mode", choices=("exact", "log"), default="exact")
    p.add_argument(
        "--which",
        choices=exact_moments.MOMENT_QUANTITIES,
        default=None,
        help="one quantity (default: all three)",
    )
    p.add_argument(
        "--sweep",
        type=_even_n,
        nargs="*",
        default=None,
        help="ratio sweep over n (default 50 100 200 400)",
    )
    p.add_argument("--resolve", action="store_true", help="identify E Y^2 vs E Y(Y-1) at n=2")
    p.add_argument("--mp", action="store_true", help="128-bit mpmath cross-check")

    p = sub.add_parser("landscape", parents=[common], help="verify the maximum of f on J")
    p.add_argument("--check", choices=LANDSCAPE_CHECKS, action="append", default=None)
    p.add_argument("--starts", type=int, default=100)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--points", type=int, default=1000, help="random points for grad check")

    p = sub.add_parser("conditioning", parents=[common], help="lambda_k, mu_k, delta_k")
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--series", action="store_true", help="exp(sum lambda_k delta_k^2)")
    p.add_argument("--mc", action="store_true", help="Monte Carlo joint moments")
    p.add_argument("--n", type=_even_n, default=12)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--exact-n", type=_even_n, default=None, help="finite-n joint moments")

    p = sub.add_parser("report", parents=[common], help="consolidate run manifests")
    p.add_argument("manifests", nargs="*")
    return parser


def run_report(args: argparse.Namespace) -> int:
    if not args.manifests:
        logger.error("report needs at least one manifest")
        return EXIT_USAGE
    try:
        report = consolidate(args.manifests)
    except ManifestError as e:
        logger.error(str(e))
        return EXIT_USAGE
    print(report.render_text())
    if args.out:
        Path(args.out).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point for the threeflow command line."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if args.command == "report":
        if args.debug:
            logging.getLogger().setLevel(logging.DEBUG)
        return run_report(args)
    try:
        return ThreeflowRunner(args, argv).run()
    except (SizeCapError, RetryExhaustedError) as e:
        logger.error(f"{e}")
        return EXIT_CAP
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
