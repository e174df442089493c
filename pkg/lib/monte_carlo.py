"""
Sampling-based checks of the closed forms and desk-scale adversarial training.

All randomness flows from numpy Generators; cells of a sweep get their own
sub-seed derived from the root seed and the cell coordinates.
"""

import enum
import hashlib
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import humanize
import numpy as np
from scipy.special import expit
from scipy.stats import norm

from . import gaussian_theory
from .classifier import AllNegative, LinearClassifier, LossReport, PerturbSpec, dual_vector, lp_norm
from .errors import DegenerateClassifierError, DomainError, TrainingDivergenceError
from .gaussian_theory import GaussianMixture
from .linalg_core import spd_sqrt
from .stable_dist import sample_multivariate
from .stable_theory import SasMixture

Mixture = Union[GaussianMixture, SasMixture]


def derive_seed(root_seed: int, *coords: Any) -> int:
    """64-bit sub-seed from a root seed and the coordinates of a grid cell."""
    text = "/".join([str(int(root_seed))] + [repr(c) for c in coords])
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class SampleSet:
    features: np.ndarray
    labels: np.ndarray
    imbalance: float
    seed: Optional[int] = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if not np.all(np.isin(labels, (-1, 1))):
            raise DomainError("labels must be -1 or +1")
        if self.features.shape[0] != labels.shape[0]:
            raise DomainError("features and labels disagree on the sample count")

    @property
    def n_plus(self) -> int:
        return int(np.sum(self.labels == 1))

    @property
    def n_minus(self) -> int:
        return int(np.sum(self.labels == -1))

    def subset(self, index: np.ndarray) -> "SampleSet":
        labels = self.labels[index]
        plus = int(np.sum(labels == 1))
        realized = int(np.sum(labels == -1)) / plus if plus else math.inf
        return SampleSet(self.features[index], labels, realized, self.seed)

    def class_means(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.features[self.labels == 1].mean(axis=0), self.features[self.labels == -1].mean(axis=0)

    def split(self, rng: np.random.Generator, parts: Sequence[int] = (8, 1, 1)) -> List["SampleSet"]:
        """Stratified split into len(parts) sets with the given proportions."""
        chunks: List[List[np.ndarray]] = [[] for _ in parts]
        weights = np.cumsum(parts) / np.sum(parts)
        for label in (1, -1):
            index = rng.permutation(np.nonzero(self.labels == label)[0])
            bounds = np.concatenate([[0], np.round(weights * index.size).astype(int)])
            for i in range(len(parts)):
                chunks[i].append(index[bounds[i] : bounds[i + 1]])
        return [self.subset(np.sort(np.concatenate(chunk))) for chunk in chunks]


def _draw(spec: Mixture, positive: bool, rng: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(spec, GaussianMixture):
        mean = spec.theta_plus if positive else spec.theta_minus
        return mean + rng.standard_normal((n, spec.dim)) @ spd_sqrt(spec.sigma)
    return sample_multivariate(spec.mv_plus if positive else spec.mv_minus, rng, n)


def _minority_count(n_major: int, imbalance: float) -> int:
    count = int(round(n_major / imbalance))
    if count < 1:
        raise DomainError(f"n_major={n_major} leaves no minority samples at R={imbalance}")
    return count


def sample_mixture(
    spec: Mixture,
    n_major: int,
    rng: np.random.Generator,
    imbalance: Optional[float] = None,
    seed: Optional[int] = None,
) -> SampleSet:
    """n_major negatives and round(n_major / R) positives, shuffled."""
    if n_major < 1:
        raise DomainError("n_major must be at least 1")
    imbalance = spec.imbalance if imbalance is None else imbalance
    if not imbalance >= 1:
        raise DomainError(f"imbalance ratio must be >= 1, got {imbalance}")
    n_minor = _minority_count(n_major, imbalance)
    minus = _draw(spec, False, rng, n_major)
    plus = _draw(spec, True, rng, n_minor)
    features = np.vstack([minus, plus])
    labels = np.concatenate([-np.ones(n_major, dtype=int), np.ones(n_minor, dtype=int)])
    order = rng.permutation(labels.size)
    return SampleSet(features[order], labels[order], n_major / n_minor, seed)


def nested_imbalance_group(
    spec: Mixture, n_major: int, ratios: Sequence[float], rng: np.random.Generator
) -> Dict[float, SampleSet]:
    """
    Datasets for increasing R sharing one majority sample.

    Each minority set is a subsample of the minority set of the previous,
    smaller R.
    """
    ratios = sorted(float(r) for r in ratios)
    if not ratios:
        return {}
    if ratios[0] < 1:
        raise DomainError("imbalance ratios must be >= 1")
    minus = _draw(spec, False, rng, n_major)
    plus = _draw(spec, True, rng, _minority_count(n_major, ratios[0]))
    group = {}
    for ratio in ratios:
        keep = _minority_count(n_major, ratio)
        plus = plus[np.sort(rng.choice(plus.shape[0], size=keep, replace=False))]
        features = np.vstack([minus, plus])
        labels = np.concatenate([-np.ones(n_major, dtype=int), np.ones(keep, dtype=int)])
        group[ratio] = SampleSet(features, labels, n_major / keep)
    return group


def epsilon_grid(sample: SampleSet, p: float, fractions: Sequence[float] = (0.25, 0.375, 0.5)) -> List[float]:
    """Radii proportional to the l_p distance between the empirical class means."""
    mean_plus, mean_minus = sample.class_means()
    distance = lp_norm(mean_plus - mean_minus, p)
    return [float(f) * distance for f in fractions]


# -- evaluation --------------------------------------------------------------


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    if trials < 1:
        raise DomainError("Wilson interval needs at least one trial")
    z = float(norm.ppf(0.5 + confidence / 2))
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class EvalReport:
    acc_plus: float
    acc_minus: float
    acc_overall: float
    n_plus: int
    n_minus: int
    ci_plus: Tuple[float, float]
    ci_minus: Tuple[float, float]
    robust_acc_plus: Optional[float] = None
    robust_acc_minus: Optional[float] = None
    ad_gap: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def ad(self) -> float:
        return self.acc_minus - self.acc_plus

    @property
    def loss_plus(self) -> float:
        return 1.0 - self.acc_plus

    @property
    def loss_minus(self) -> float:
        return 1.0 - self.acc_minus

    @property
    def majority_share(self) -> float:
        """Fraction of points labelled -1 by the classifier."""
        predicted_minus = self.acc_minus * self.n_minus + (1.0 - self.acc_plus) * self.n_plus
        return predicted_minus / (self.n_plus + self.n_minus)

    @property
    def ci_halfwidth(self) -> float:
        return max((self.ci_plus[1] - self.ci_plus[0]) / 2, (self.ci_minus[1] - self.ci_minus[0]) / 2)

    def with_gap(self, baseline: "EvalReport") -> "EvalReport":
        return replace(self, ad_gap=self.ad - baseline.ad)

    def to_loss_report(self) -> LossReport:
        return LossReport(
            loss_plus=self.loss_plus,
            loss_minus=self.loss_minus,
            imbalance=self.n_minus / self.n_plus,
            provenance="monte_carlo",
            robust_plus=None if self.robust_acc_plus is None else 1.0 - self.robust_acc_plus,
            robust_minus=None if self.robust_acc_minus is None else 1.0 - self.robust_acc_minus,
        )

    def sigma_distance(self, theory: LossReport) -> Dict[str, float]:
        """|empirical - theory| in binomial standard errors of the theory value."""

        def distance(observed: float, expected: float, trials: int) -> float:
            sigma = max(math.sqrt(expected * (1 - expected) / trials), 1.0 / trials)
            return abs(observed - expected) / sigma

        out = {
            "plus": distance(self.loss_plus, theory.loss_plus, self.n_plus),
            "minus": distance(self.loss_minus, theory.loss_minus, self.n_minus),
        }
        if self.robust_acc_plus is not None and theory.robust_plus is not None:
            out["robust_plus"] = distance(1 - self.robust_acc_plus, theory.robust_plus, self.n_plus)
            out["robust_minus"] = distance(1 - self.robust_acc_minus, theory.robust_minus, self.n_minus)
        return out

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "acc_plus": self.acc_plus,
            "acc_minus": self.acc_minus,
            "acc_overall": self.acc_overall,
            "ad": self.ad,
            "ad_gap": self.ad_gap,
            "ci_halfwidth": self.ci_halfwidth,
            "majority_share": self.majority_share,
            "n_plus": self.n_plus,
            "n_minus": self.n_minus,
            "robust_acc_plus": self.robust_acc_plus,
            "robust_acc_minus": self.robust_acc_minus,
            "provenance": "monte_carlo",
        }
        out.update(self.extra)
        return out


Classifier = Union[LinearClassifier, AllNegative]


def _signed_margins(sample: SampleSet, classifier: Classifier) -> np.ndarray:
    return sample.labels * classifier.margins(sample.features)


def empirical_losses(sample: SampleSet, classifier: Classifier, pert: Optional[PerturbSpec] = None) -> EvalReport:
    """
    Per-class indicator means; the robust indicator is 1{y (w^T x + b) <= eps ||w||_q}.

    A zero margin counts as an error for either class.
    """
    if sample.n_plus == 0 or sample.n_minus == 0:
        raise DomainError("both classes must be present to evaluate class-wise losses")
    signed = _signed_margins(sample, classifier)
    plus = sample.labels == 1
    correct = signed > 0
    correct_plus = int(np.sum(correct & plus))
    correct_minus = int(np.sum(correct & ~plus))
    robust_plus = robust_minus = None
    if pert is not None:
        shift = pert.epsilon * lp_norm(classifier.w, pert.q) if np.any(classifier.w) else 0.0
        robust = signed > shift
        robust_plus = float(np.sum(robust & plus)) / sample.n_plus
        robust_minus = float(np.sum(robust & ~plus)) / sample.n_minus
    return EvalReport(
        acc_plus=correct_plus / sample.n_plus,
        acc_minus=correct_minus / sample.n_minus,
        acc_overall=(correct_plus + correct_minus) / sample.labels.size,
        n_plus=sample.n_plus,
        n_minus=sample.n_minus,
        ci_plus=wilson_interval(correct_plus, sample.n_plus),
        ci_minus=wilson_interval(correct_minus, sample.n_minus),
        robust_acc_plus=robust_plus,
        robust_acc_minus=robust_minus,
    )


def worst_case_perturbation(features: np.ndarray, labels: np.ndarray, w: np.ndarray, pert: PerturbSpec) -> np.ndarray:
    """x - y eps d, with d the unit l_p vector maximizing d^T w; exact for linear scores."""
    return features - np.outer(labels, pert.epsilon * dual_vector(w, pert.q))


def attack_accuracy(sample: SampleSet, classifier: LinearClassifier, pert: PerturbSpec) -> np.ndarray:
    """Per-point correctness after the exact worst-case perturbation."""
    attacked = worst_case_perturbation(sample.features, sample.labels, classifier.w, pert)
    return sample.labels * classifier.margins(attacked) > 0


# -- adversarial training ----------------------------------------------------


class Attack(enum.Enum):
    NONE = "none"
    FGM = "fgm"
    PGD = "pgd"


@dataclass(frozen=True)
class TrainConfig:
    attack: Attack = Attack.NONE
    pert: PerturbSpec = PerturbSpec(p=math.inf, epsilon=0.0)
    lr: float = 0.1
    batch: Optional[int] = None
    max_epochs: int = 500
    patience: int = 50
    lr_decay: float = 0.5
    decay_patience: int = 10
    pgd_steps: int = 10
    pgd_step_size: Optional[float] = None
    max_grad_norm: float = 5.0
    log_every: int = 100

    def __post_init__(self):
        if self.patience < 1:
            raise DomainError("patience must be at least 1")
        if not 0 < self.lr_decay <= 1 or self.decay_patience < 1:
            raise DomainError("lr_decay must lie in (0, 1] and decay_patience must be at least 1")
        if self.lr <= 0 or self.max_epochs < 1:
            raise DomainError("learning rate and epoch budget must be positive")
        if self.batch is not None and self.batch < 1:
            raise DomainError("batch size must be at least 1")
        if self.pgd_steps < 1:
            raise DomainError("PGD needs at least one step")

    @property
    def step_size(self) -> float:
        if self.pgd_step_size is not None:
            return self.pgd_step_size
        return 2.5 * self.pert.epsilon / self.pgd_steps

    def standard(self) -> "TrainConfig":
        return replace(self, attack=Attack.NONE, pert=self.pert.with_epsilon(0.0))


@dataclass
class TrainingTrace:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False
    lr_decays: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
            "lr_decays": self.lr_decays,
        }


@dataclass(frozen=True)
class TrainResult:
    classifier: LinearClassifier
    trace: TrainingTrace
    test: SampleSet


def _logistic(signed: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, -signed)))


def _pgd(features: np.ndarray, labels: np.ndarray, w: np.ndarray, b: float, cfg: TrainConfig) -> np.ndarray:
    eps, p = cfg.pert.epsilon, cfg.pert.p
    if not (p == 2 or math.isinf(p)):
        return worst_case_perturbation(features, labels, w, cfg.pert)
    delta = np.zeros_like(features)
    for _ in range(cfg.pgd_steps):
        signed = labels * ((features + delta) @ w + b)
        grad = (-expit(-signed) * labels)[:, None] * w[None, :]
        if math.isinf(p):
            delta = np.clip(delta + cfg.step_size * np.sign(grad), -eps, eps)
        else:
            lengths = np.linalg.norm(grad, axis=1, keepdims=True)
            delta = delta + cfg.step_size * np.divide(grad, lengths, out=np.zeros_like(grad), where=lengths > 0)
            radii = np.linalg.norm(delta, axis=1, keepdims=True)
            delta = delta * np.minimum(1.0, eps / np.maximum(radii, 1e-300))
    return features + delta


def _adversarial(features: np.ndarray, labels: np.ndarray, w: np.ndarray, b: float, cfg: TrainConfig) -> np.ndarray:
    if cfg.attack is Attack.NONE or cfg.pert.epsilon == 0:
        return features
    if cfg.attack is Attack.FGM:
        return worst_case_perturbation(features, labels, w, cfg.pert)
    return _pgd(features, labels, w, b, cfg)


def _robust_logistic(sample: SampleSet, w: np.ndarray, b: float, cfg: TrainConfig) -> float:
    signed = sample.labels * (sample.features @ w + b)
    if cfg.attack is not Attack.NONE:
        signed = signed - cfg.pert.epsilon * lp_norm(w, cfg.pert.q)
    return _logistic(signed)


def adv_train_linear(sample: SampleSet, cfg: TrainConfig, rng: np.random.Generator) -> TrainResult:
    """
    Logistic regression on adversarially perturbed inputs with early stopping.

    The sample is split 8:1:1 into train, validation and test sets; the
    returned classifier has the lowest validation loss seen. The intercept
    starts at the log-odds of the training labels. Every `decay_patience`
    epochs without a new best, training resumes from the best weights with
    the learning rate scaled by `lr_decay`; `patience` such epochs stop it.

    Raises:
        TrainingDivergenceError: when a loss becomes non-finite
    """
    started = time.monotonic()
    train, val, test = sample.split(rng)
    d = sample.features.shape[1]
    w = np.zeros(d)
    b = float(np.log(train.n_plus / train.n_minus)) if train.n_plus and train.n_minus else 0.0
    lr = cfg.lr
    best = (w.copy(), b)
    best_val = math.inf
    stale = 0
    trace = TrainingTrace()
    batch = cfg.batch or train.labels.size

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(train.labels.size) if batch < train.labels.size else np.arange(train.labels.size)
        for start in range(0, order.size, batch):
            index = order[start : start + batch]
            x, y = train.features[index], train.labels[index]
            x_adv = _adversarial(x, y, w, b, cfg)
            weight = -expit(-(y * (x_adv @ w + b))) * y
            grad_w = x_adv.T @ weight / y.size
            grad_b = float(np.mean(weight))
            size = math.sqrt(float(grad_w @ grad_w) + grad_b * grad_b)
            if size > cfg.max_grad_norm:
                grad_w, grad_b = grad_w * (cfg.max_grad_norm / size), grad_b * (cfg.max_grad_norm / size)
            w = w - lr * grad_w
            b = b - lr * grad_b

        train_loss = _robust_logistic(train, w, b, cfg)
        val_loss = _robust_logistic(val, w, b, cfg)
        trace.train_loss.append(train_loss)
        trace.val_loss.append(val_loss)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingDivergenceError(f"training diverged at epoch {epoch}", trace.train_loss)
        if val_loss < best_val:
            best_val, best, stale = val_loss, (w.copy(), b), 0
            trace.best_epoch = epoch
        else:
            stale += 1
            if stale >= cfg.patience:
                trace.stopped_early = True
                logging.debug(f"early stopping at epoch {epoch}, best epoch {trace.best_epoch}")
                break
            if stale % cfg.decay_patience == 0 and cfg.lr_decay < 1:
                # resume from the best point with a smaller step
                w, b = best[0].copy(), best[1]
                lr *= cfg.lr_decay
                trace.lr_decays += 1
                logging.debug(f"validation stalled at epoch {epoch}, learning rate now {lr:.3g}")
        if cfg.log_every and epoch % cfg.log_every == 0:
            logging.debug(f"epoch {epoch}: train {train_loss:.6f}, val {val_loss:.6f}")

    w, b = best
    if not np.any(w):
        # never left the origin; keep the intercept sign with a vanishing slope
        w = np.full(d, 1e-12)
    logging.info(
        f"trained {cfg.attack.value} classifier on {humanize.intcomma(train.labels.size)} points "
        f"in {humanize.naturaldelta(time.monotonic() - started)}"
    )
    return TrainResult(LinearClassifier(w, b), trace, test)


# -- sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class SweepGrid:
    imbalances: Tuple[float, ...]
    epsilons: Tuple[float, ...]
    ps: Tuple[float, ...]
    seeds: Tuple[int, ...]

    def cells(self):
        for imbalance in self.imbalances:
            for p in self.ps:
                for epsilon in self.epsilons:
                    for seed in self.seeds:
                        yield imbalance, p, epsilon, seed


@dataclass(frozen=True)
class SweepRow:
    scenario_id: str
    imbalance: float
    p: float
    epsilon: float
    seed: int
    report: EvalReport
    acc_drop: float
    theory_gap: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "R": self.imbalance,
            "p": "inf" if math.isinf(self.p) else self.p,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "acc_plus": self.report.acc_plus,
            "acc_minus": self.report.acc_minus,
            "acc_overall": self.report.acc_overall,
            "ad": self.report.ad,
            "ad_gap": self.report.ad_gap,
            "ci_halfwidth": self.report.ci_halfwidth,
            "majority_share": self.report.majority_share,
            "robust_acc_plus": self.report.robust_acc_plus,
            "robust_acc_minus": self.report.robust_acc_minus,
            "acc_drop": self.acc_drop,
            "theory_gap": self.theory_gap,
        }


def _theory_gap(spec: Mixture, imbalance: float, pert: PerturbSpec) -> Optional[float]:
    if not isinstance(spec, GaussianMixture) or pert.epsilon == 0:
        return None
    try:
        rows = gaussian_theory.disparity_gap(spec, pert, [imbalance])
    except DegenerateClassifierError:
        return None
    return rows[0].gap


def sweep(
    spec: Mixture,
    grid: SweepGrid,
    n_major: int,
    train_cfg: TrainConfig,
    root_seed: int,
    scenario_id: str = "sweep",
) -> List[SweepRow]:
    """
    Train standard and robust linear models on every (R, p, eps, seed) cell.

    The data and the standard baseline of a cell depend only on (R, seed), so
    every eps and p at the same (R, seed) is compared against the same
    standard-trained model.
    """
    rows: List[SweepRow] = []
    baselines: Dict[Tuple[float, int], Tuple[SampleSet, TrainResult, EvalReport]] = {}
    for imbalance, p, epsilon, seed in grid.cells():
        key = (float(imbalance), int(seed))
        if key not in baselines:
            data_rng = make_rng(derive_seed(root_seed, "data", *key))
            sample = sample_mixture(spec, n_major, data_rng, imbalance=imbalance, seed=seed)
            std = adv_train_linear(sample, train_cfg.standard(), make_rng(derive_seed(root_seed, "train", *key)))
            baselines[key] = (sample, std, empirical_losses(std.test, std.classifier))
        sample, std, std_report = baselines[key]
        pert = PerturbSpec(p=p, epsilon=epsilon)
        if epsilon == 0:
            trained = std
        else:
            attack = train_cfg.attack if train_cfg.attack is not Attack.NONE else Attack.FGM
            cfg = replace(train_cfg, attack=attack, pert=pert)
            trained = adv_train_linear(sample, cfg, make_rng(derive_seed(root_seed, "train", *key)))
        report = empirical_losses(trained.test, trained.classifier, pert).with_gap(std_report)
        rows.append(
            SweepRow(
                scenario_id=scenario_id,
                imbalance=float(imbalance),
                p=float(p),
                epsilon=float(epsilon),
                seed=int(seed),
                report=report,
                acc_drop=std_report.acc_overall - report.acc_overall,
                theory_gap=_theory_gap(spec, float(imbalance), pert),
            )
        )
    logging.info(f"sweep {scenario_id}: {humanize.intcomma(len(rows))} cells")
    return rows


def aggregate(rows: Sequence[SweepRow]) -> List[Dict[str, Any]]:
    """Mean and standard deviation over seeds for every (R, p, eps) cell."""
    groups: Dict[Tuple[float, float, float], List[SweepRow]] = {}
    for row in rows:
        groups.setdefault((row.imbalance, row.p, row.epsilon), []).append(row)
    out = []
    for (imbalance, p, epsilon), members in groups.items():
        entry: Dict[str, Any] = {
            "scenario_id": members[0].scenario_id,
            "R": imbalance,
            "p": "inf" if math.isinf(p) else p,
            "epsilon": epsilon,
            "runs": len(members),
        }
        for column in ("acc_plus", "acc_minus", "acc_overall", "ad", "ad_gap", "acc_drop", "majority_share"):
            values = np.array([m.to_dict()[column] for m in members], dtype=float)
            entry[f"{column}_mean"] = float(values.mean())
            entry[f"{column}_sd"] = float(values.std(ddof=1)) if values.size > 1 else 0.0
        out.append(entry)
    return out
