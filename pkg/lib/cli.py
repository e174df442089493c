"""Command line: solve, verify, sweep, ridge and train, plus config generation."""

import argparse
import logging
import math
import os
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, List, Optional

import coloredlogs
import humanize
import numpy as np

from . import gaussian_theory, monte_carlo, reports, ridge_disparity, stable_theory, verification
from .classifier import LinearClassifier, LossReport, PerturbSpec, lp_norm
from .errors import EXIT_OK, EXIT_VERIFY_FAILED, ConfigError, RobustGapError
from .experiment_config import (
    KINDS,
    ExperimentConfig,
    get_default_config,
    load_config,
    render_config,
    run_interactive_config,
)
from .gaussian_theory import GaussianMixture
from .stable_theory import SasMixture, SphereOptions

LOG_FORMAT = "%(asctime)s robustgap %(levelname)s: %(message)s"
SOLVE_KINDS = ("gaussian", "toy", "stable_ic", "stable_ec", "cauchy")
COMMAND_KINDS = {
    "solve": SOLVE_KINDS,
    "verify": ("verify",),
    "sweep": ("train",),
    "train": ("train",),
    "ridge": ("ridge",),
}
GAP_COLUMNS = [
    "R",
    "std_loss_plus",
    "std_loss_minus",
    "rob_loss_plus",
    "rob_loss_minus",
    "ad_std",
    "ad_rob",
    "gap",
    "in_monotone_region",
]
LOSS_COLUMNS = [
    "classifier",
    "loss_plus",
    "loss_minus",
    "robust_plus",
    "robust_minus",
    "acc_plus",
    "acc_minus",
    "ad",
    "overall_std_loss",
]
CAUCHY_COLUMNS = [
    "epsilon",
    "std_loss_plus",
    "std_loss_minus",
    "rob_loss_plus",
    "rob_loss_minus",
    "ad_std",
    "ad_rob",
    "gap",
    "collapsed",
    "theorem_condition",
]


def setup_logging(verbose: bool, log_dir: Optional[str] = None) -> Optional[logging.Handler]:
    coloredlogs.install(level="DEBUG" if verbose else "INFO", fmt=LOG_FORMAT)
    if log_dir is None:
        return None
    Path(log_dir).mkdir(parents=True, exist_ok=True)
    file_handler = RotatingFileHandler(
        os.path.join(log_dir, "robustgap.log"),
        maxBytes=10 * 1024 * 1024,  # 10 MB
        backupCount=1,
    )
    file_handler.setLevel(logging.INFO)
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(file_handler)
    return file_handler


def _losses_line(label: str, losses: LossReport) -> str:
    return (
        f"{label}: acc+ {losses.acc_plus:.4f}  acc- {losses.acc_minus:.4f}  "
        f"AD {losses.ad:+.4f}  overall loss {losses.overall_std_loss:.4f}"
    )


def _loss_rows(std: LossReport, rob: LossReport) -> List[Dict[str, Any]]:
    return [{"classifier": label, **losses.to_dict()} for label, losses in (("standard", std), ("robust", rob))]


def _perturbation(params: Dict[str, Any]) -> PerturbSpec:
    return PerturbSpec(p=params["p"], epsilon=params["epsilon"], kappa=params.get("kappa"))


# -- solve -------------------------------------------------------------------


def _solve_gaussian(params: Dict[str, Any], cfg: ExperimentConfig) -> Dict[str, Any]:
    dim = len(params["theta_plus"])
    sigma = np.eye(dim) if params["sigma"] is None else params["sigma"]
    mix = GaussianMixture(params["theta_plus"], params["theta_minus"], sigma, params["imbalance"])
    pert = _perturbation(params)
    pert.check_radius(mix.theta_bar)

    kkt = gaussian_theory.kkt_solution(mix, pert)
    _, std = gaussian_theory.solve_standard(mix)
    rob_w = kkt.v / kkt.s
    rob = LinearClassifier(
        rob_w, gaussian_theory.optimal_intercept(mix, rob_w, pert.epsilon * lp_norm(rob_w, pert.q))
    )
    std_losses = gaussian_theory.classwise_losses(mix, std, pert)
    rob_losses = gaussian_theory.classwise_losses(mix, rob, pert)
    certificate = gaussian_theory.direction_norm_certificates(kkt, mix, pert)
    logging.info(_losses_line("standard", std_losses))
    logging.info(_losses_line("robust  ", rob_losses))
    logging.info(
        f"robust direction is {certificate.angle_degrees:.2f} degrees from the standard one; "
        f"KKT residual {kkt.residual_v:.2e}"
    )

    rows = []
    for row in gaussian_theory.disparity_gap(mix, pert, params["r_grid"]):
        rows.append(
            {
                "R": row.imbalance,
                "std_loss_plus": row.std.loss_plus,
                "std_loss_minus": row.std.loss_minus,
                "rob_loss_plus": row.rob.loss_plus,
                "rob_loss_minus": row.rob.loss_minus,
                "ad_std": row.std.ad,
                "ad_rob": row.rob.ad,
                "gap": row.gap,
                "in_monotone_region": row.in_monotone_region,
            }
        )
    return {
        "summary": {
            "perturbation": pert.to_dict(),
            "kkt": kkt.to_dict(),
            "standard": {"classifier": std.to_dict(), "losses": std_losses.to_dict()},
            "robust": {"classifier": rob.to_dict(), "losses": rob_losses.to_dict()},
            "certificate": certificate.to_dict(),
        },
        "losses": _loss_rows(std_losses, rob_losses),
        "table": (rows, GAP_COLUMNS),
    }


def _solve_toy(params: Dict[str, Any], cfg: ExperimentConfig) -> Dict[str, Any]:
    toy = gaussian_theory.toy_example(
        params["m"], params["n"], params["eta"], params["gamma"], params["epsilon"], params["imbalance"]
    )
    logging.info(_losses_line("standard", toy.std))
    logging.info(_losses_line("robust  ", toy.rob))
    logging.info(f"closed form vs solver: max discrepancy {toy.max_discrepancy:.2e}")
    return {"summary": toy.to_dict(), "losses": _loss_rows(toy.std, toy.rob), "table": None}


def _solve_stable_ic(params: Dict[str, Any], cfg: ExperimentConfig) -> Dict[str, Any]:
    mix = SasMixture.independent(
        params["theta_plus"], params["theta_minus"], params["alpha"], scales=params["scales"]
    )
    pert = _perturbation(params)
    comparison = stable_theory.ic_comparison(mix, pert, SphereOptions(starts=params["starts"], seed=cfg.seed))
    logging.info(f"regime: {comparison.case}")
    logging.info(_losses_line("standard", comparison.std_losses))
    logging.info(_losses_line("robust  ", comparison.rob_losses))
    return {
        "summary": {"perturbation": pert.to_dict(), **comparison.to_dict()},
        "losses": _loss_rows(comparison.std_losses, comparison.rob_losses),
        "table": None,
    }


def _solve_stable_ec(params: Dict[str, Any], cfg: ExperimentConfig) -> Dict[str, Any]:
    mix = SasMixture.elliptical(params["theta_plus"], params["theta_minus"], params["alpha"], params["shape"])
    pert = _perturbation(params)
    solution = stable_theory.solve_ec(mix, pert)
    logging.info(_losses_line("standard", solution.std_losses))
    logging.info(_losses_line("robust  ", solution.rob_losses))
    if solution.both_classes_worse:
        logging.info("robust classifier is worse on both classes")
    return {
        "summary": {"perturbation": pert.to_dict(), **solution.to_dict()},
        "losses": _loss_rows(solution.std_losses, solution.rob_losses),
        "table": None,
    }


def _solve_cauchy(params: Dict[str, Any], cfg: ExperimentConfig) -> Dict[str, Any]:
    mix = SasMixture.independent(params["theta_plus"], params["theta_minus"], 1.0, params["imbalance"])
    threshold = stable_theory.collapse_threshold(mix.theta_bar)
    rows = []
    analyses = []
    for epsilon in params["epsilons"]:
        analysis = stable_theory.cauchy_analysis(mix, PerturbSpec(p=math.inf, epsilon=epsilon, kappa=params["kappa"]))
        analyses.append({"epsilon": epsilon, **analysis.to_dict()})
        rows.append(
            {
                "epsilon": epsilon,
                "std_loss_plus": analysis.std.loss_plus,
                "std_loss_minus": analysis.std.loss_minus,
                "rob_loss_plus": analysis.rob.loss_plus,
                "rob_loss_minus": analysis.rob.loss_minus,
                "ad_std": analysis.std.ad,
                "ad_rob": analysis.rob.ad,
                "gap": analysis.gap,
                "collapsed": analysis.collapsed,
                "theorem_condition": analysis.theorem_condition,
            }
        )
        logging.info(f"eps={epsilon:g}: AD gap {analysis.gap:+.4f}{' (collapsed)' if analysis.collapsed else ''}")
    if mix.imbalance >= threshold:
        logging.info(f"R={mix.imbalance:g} is past the collapse threshold {threshold:.4g}")
    return {
        "summary": {"collapse_threshold": threshold, "analyses": analyses},
        "losses": None,
        "table": (rows, CAUCHY_COLUMNS),
    }


SOLVERS = {
    "gaussian": _solve_gaussian,
    "toy": _solve_toy,
    "stable_ic": _solve_stable_ic,
    "stable_ec": _solve_stable_ec,
    "cauchy": _solve_cauchy,
}


def cmd_solve(cfg: ExperimentConfig) -> List[str]:
    result = SOLVERS[cfg.kind](cfg.params, cfg)
    outputs = [reports.write_json(os.path.join(cfg.out_dir, f"{cfg.kind}_summary.json"), result["summary"])]
    if result["table"] is not None:
        rows, columns = result["table"]
        outputs += reports.write_table(cfg.out_dir, f"{cfg.kind}_gap", rows, cfg.format, columns)
    if result["losses"] is not None:
        outputs += reports.write_table(cfg.out_dir, f"{cfg.kind}_losses", result["losses"], cfg.format, LOSS_COLUMNS)
    return outputs


# -- ridge -------------------------------------------------------------------


def cmd_ridge(cfg: ExperimentConfig) -> List[str]:
    params = cfg.params
    scenario = ridge_disparity.RidgeScenario(
        mu1=params["mu1"],
        mu2=params["mu2"],
        k1=params["k1"],
        k2=params["k2"],
        lambda_prime=params["lambda_prime"],
        beta_star=params["beta_star"],
        noise_var=params["noise_var"],
    )
    disparity = ridge_disparity.general_gram_disparity(scenario)
    logging.info(f"ridge gaps: g1 {disparity.g1:.6g}  g2 {disparity.g2:.6g}")
    summary: Dict[str, Any] = {
        "ratio": scenario.ratio,
        "disparity": disparity.to_dict(),
        "envelopes": ridge_disparity.tech_data_envelopes(scenario).to_dict(),
        "losses": ridge_disparity.ridge_group_losses(scenario).to_dict(),
    }
    try:
        summary["orthogonal"] = ridge_disparity.toy_orthogonal_disparity(scenario).to_dict()
    except RobustGapError as exc:
        logging.debug(f"skipping orthogonal closed form: {exc}")
        summary["orthogonal"] = None
    if len(params["k1_grid"]) >= 2:
        summary["g1_slope"] = ridge_disparity.g1_scaling_slope(scenario, params["k1_grid"])
        logging.info(f"|g1| scales as k1^{summary['g1_slope']:.3f}")

    rows = []
    if params["gram_samples"] and params["noise_var"] > 0:
        noise = ridge_disparity.NoiseSpec(params["noise_var"], params["noise_kind"])
        for index in range(params["gram_samples"]):
            rng = monte_carlo.make_rng(monte_carlo.derive_seed(cfg.seed, "gram", index))
            pair = ridge_disparity.sample_gram(scenario, noise, rng)
            taylor = ridge_disparity.taylor_first_order(scenario, pair.s_prime)
            exact1, exact2 = ridge_disparity.gaps_for_gram(scenario, pair.s_prime)
            trace_lhs, trace_rhs = pair.trace_check(taylor.m1)
            rows.append(
                {
                    "sample": index,
                    "g1": exact1,
                    "g2": exact2,
                    "g_tilde1": taylor.g_tilde1,
                    "g_tilde2": taylor.g_tilde2,
                    "taylor_error": max(abs(exact1 - taylor.g_tilde1), abs(exact2 - taylor.g_tilde2)),
                    "decomposition_residual": pair.decomposition_residual(scenario),
                    "trace_lhs": trace_lhs,
                    "trace_rhs": trace_rhs,
                }
            )
        logging.info(f"sampled {humanize.intcomma(len(rows))} noisy grams")

    outputs = [reports.write_json(os.path.join(cfg.out_dir, "ridge_summary.json"), summary)]
    if rows:
        outputs += reports.write_table(cfg.out_dir, "ridge_grams", rows, cfg.format)
    return outputs


# -- training ----------------------------------------------------------------


def build_train_mixture(params: Dict[str, Any]):
    family = params["family"]
    dim = len(params["theta_plus"])
    if family == "gaussian":
        sigma = np.eye(dim) if params["sigma"] is None else params["sigma"]
        return GaussianMixture(params["theta_plus"], params["theta_minus"], sigma)
    if family == "cauchy":
        return SasMixture.independent(params["theta_plus"], params["theta_minus"], 1.0)
    if family == "stable_ic":
        return SasMixture.independent(params["theta_plus"], params["theta_minus"], params["alpha"])
    return SasMixture.elliptical(params["theta_plus"], params["theta_minus"], params["alpha"], params["sigma"])


def _train_rows(cfg: ExperimentConfig) -> List[monte_carlo.SweepRow]:
    params = cfg.params
    grid = monte_carlo.SweepGrid(
        imbalances=tuple(params["imbalances"]),
        epsilons=tuple(params["epsilons"]),
        ps=tuple(params["ps"]),
        seeds=tuple(params["seeds"]),
    )
    train_cfg = monte_carlo.TrainConfig(
        attack=monte_carlo.Attack(params["attack"]),
        lr=params["lr"],
        batch=params["batch"],
        max_epochs=params["max_epochs"],
        patience=params["patience"],
        lr_decay=params["lr_decay"],
        decay_patience=params["decay_patience"],
        pgd_steps=params["pgd_steps"],
    )
    scenario_id = os.path.splitext(os.path.basename(cfg.source))[0] if cfg.source else params["family"]
    return monte_carlo.sweep(build_train_mixture(params), grid, params["n_major"], train_cfg, cfg.seed, scenario_id)


def cmd_sweep(cfg: ExperimentConfig) -> List[str]:
    rows = [row.to_dict() for row in _train_rows(cfg)]
    return reports.write_table(cfg.out_dir, "sweep", rows, cfg.format, reports.SWEEP_COLUMNS)


def cmd_train(cfg: ExperimentConfig) -> List[str]:
    summary = monte_carlo.aggregate(_train_rows(cfg))
    for entry in summary:
        logging.info(
            f"R={entry['R']:g} p={entry['p']} eps={entry['epsilon']:g}: "
            f"AD {entry['ad_mean']:+.4f} +/- {entry['ad_sd']:.4f}, gap {entry['ad_gap_mean']:+.4f}"
        )
    return reports.write_table(cfg.out_dir, "train", summary, cfg.format)


# -- verify ------------------------------------------------------------------


def cmd_verify(cfg: ExperimentConfig, inject_bias: float = 0.0, junit: Optional[str] = None) -> int:
    params = cfg.params
    scenarios = verification.default_scenarios()
    if params["scenarios"] is not None:
        known = {s.name for s in scenarios}
        unknown = [name for name in params["scenarios"] if name not in known]
        if unknown:
            raise ConfigError(f"unknown scenario {unknown[0]!r}", field="verify.scenarios")
        scenarios = [s for s in scenarios if s.name in params["scenarios"]]
    suite = verification.run_suite(
        cfg.seed,
        n_major=params["n_major"],
        inject_bias=inject_bias,
        sigmas=params["sigmas"],
        scenarios=scenarios,
        certificates=params["certificates"],
    )
    for failure in suite.failures:
        logging.error(f"FAILED {failure.name}: max {failure.max_distance:.2f} sigma {failure.error or ''}".rstrip())
    outputs = [reports.write_json(os.path.join(cfg.out_dir, "verify.json"), suite)]
    if junit:
        outputs.append(reports.write_junit(junit, suite))
    reports.write_manifest(cfg.out_dir, "verify", cfg.to_dict(), [p for p in outputs if p.startswith(cfg.out_dir)])
    return EXIT_OK if suite.passed else EXIT_VERIFY_FAILED


COMMANDS = {
    "solve": cmd_solve,
    "ridge": cmd_ridge,
    "sweep": cmd_sweep,
    "train": cmd_train,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="Path to YAML configuration file.")
    common.add_argument("--seed", type=int, help="Override the root seed from the config.")
    common.add_argument("--out", help="Override the output directory.")
    common.add_argument("--format", choices=("csv", "json", "both"), help="Table format.")
    common.add_argument("--verbose", help="Emit verbose logs", action="store_true")
    common.add_argument(
        "--log-file",
        action="store_true",
        help="Also log to <out>/logs/robustgap.log (rotated at 10 MB).",
    )

    parser = argparse.ArgumentParser(
        description="Class-wise accuracy disparity of standard and adversarially robust linear classifiers",
        epilog="Example: ./robustgap.py solve --config gaussian.yaml",
    )
    parser.add_argument(
        "--generate-config",
        action="store_true",
        help="Generate an example YAML configuration file and exit.",
    )
    parser.add_argument("--kind", choices=KINDS, default="gaussian", help="Scenario kind for --generate-config.")
    parser.add_argument(
        "--interactive",
        action="store_true",
        help="Interactively populate configuration values when used with --generate-config.",
    )
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("solve", parents=[common], help="Closed-form optimal classifiers and their class-wise losses.")
    verify = sub.add_parser("verify", parents=[common], help="Check closed forms against Monte Carlo estimates.")
    verify.add_argument("--junit", help="Write a JUnit XML report to this path.")
    verify.add_argument(
        "--inject-bias", type=float, default=0.0, help="Shift every closed-form intercept before sampling."
    )
    sub.add_parser("sweep", parents=[common], help="Per-seed training sweep over (R, p, eps).")
    sub.add_parser("ridge", parents=[common], help="Group-wise ridge disparity.")
    sub.add_parser("train", parents=[common], help="Seed-aggregated adversarial training.")
    return parser


def _generate_config(args) -> None:
    if args.interactive:
        interactive_config, save_path = run_interactive_config(args.kind)
        config_content = render_config(interactive_config)

        # Save to file
        try:
            with open(save_path, "w", encoding="utf-8") as f:
                f.write(config_content)
            print(f"Configuration saved to {save_path}")
        except IOError as e:
            print(f"Error saving configuration to {save_path}: {e}")
            print("Configuration content:")
            print(config_content)
    else:
        print(render_config(get_default_config(args.kind)), end="")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.interactive and not args.generate_config:
        parser.error("--interactive can only be used together with --generate-config.")

    if args.generate_config:
        _generate_config(args)
        return EXIT_OK

    if not args.command:
        parser.error("a command is required unless --generate-config is used.")

    setup_logging(args.verbose)
    file_handler = None
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, out_dir=args.out, fmt=args.format)
        if cfg.kind not in COMMAND_KINDS[args.command]:
            raise ConfigError(
                f"'{args.command}' needs a config of kind {' or '.join(COMMAND_KINDS[args.command])}, got {cfg.kind!r}",
                field="kind",
            )
        if args.log_file:
            file_handler = setup_logging(args.verbose, os.path.join(cfg.out_dir, "logs"))
        logging.info(f"{args.command}: {cfg.kind} from {cfg.source} (seed {cfg.seed})")

        if args.command == "verify":
            return cmd_verify(cfg, inject_bias=args.inject_bias, junit=args.junit)
        outputs = COMMANDS[args.command](cfg)
        reports.write_manifest(cfg.out_dir, args.command, cfg.to_dict(), outputs)
        return EXIT_OK
    except RobustGapError as exc:
        logging.error(str(exc))
        return exc.exit_code
    except KeyboardInterrupt:
        logging.info("Keyboard interrupt received; shutting down.")
        return 130
    finally:
        if file_handler is not None:
            logging.getLogger().removeHandler(file_handler)
            file_handler.close()


if __name__ == "__main__":
    sys.exit(main())
