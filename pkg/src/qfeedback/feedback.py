"""One-round classical-feedback protocols over two channel uses.

A protocol sends message ``i`` (probability ``p_i``) as a state on ``Q1 ⊗ Q2``.
``Q1`` goes through the first channel and is measured with an instrument;
outcome ``j`` selects a trace-preserving correction ``A_ij`` on ``Q2``, which
then goes through the second channel. Because corrections are indexed by the
message, the message register is never touched and stays classical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .channels import (
    Instrument,
    KrausChannel,
    apply_kraus_on,
    is_entanglement_breaking,
    min_pt_eigenvalue,
    random_channel,
    random_instrument,
    random_pure_state,
    random_state,
)
from .exceptions import DimensionMismatchError, HypothesisError, InvariantError, ParameterError
from .holevo import chi_grid_oracle_qubit
from .matops import partial_trace
from .quantum import (
    CQState,
    DensityMatrix,
    conditional_entropy,
    cq_conditional_mutual_information,
    cq_memory_mutual_information,
    cq_mutual_information,
    entropy,
)

INPUT_CLASSES = ("product", "separable", "entangled")
STRUCTURE_TOL = 1e-9
BOUND_TOL = 1e-6
# declared slack of a grid-oracle capacity reference at resolution 24
GRID_SLACK = 2e-3


def trial_seeds(seed: int, n: int) -> list[int]:
    """Per-trial seeds: the ``t``-th child of ``SeedSequence(seed)``, as one uint64."""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


@dataclass(frozen=True, eq=False)
class FeedbackProtocol:
    probs: np.ndarray
    inputs: tuple[DensityMatrix, ...]
    input_class: str
    instrument: Instrument
    corrections: Mapping[tuple[int, object], KrausChannel]
    # separable inputs: per message, a list of (weight, state_q1, state_q2)
    certificates: tuple | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if self.input_class not in INPUT_CLASSES:
            raise ParameterError(f"input_class must be one of {INPUT_CLASSES}")
        if len(probs) != len(self.inputs) or len(probs) == 0:
            raise InvariantError("need one probability per message input")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-10:
            raise InvariantError("message probabilities must be a distribution")
        dims = {s.dims for s in self.inputs}
        if len(dims) != 1 or len(next(iter(dims))) != 2:
            raise DimensionMismatchError("every input must be a state on Q1 ⊗ Q2")
        d2 = self.dims[1]
        for i in range(len(probs)):
            for j in self.instrument.labels:
                corr = self.corrections.get((i, j))
                if corr is None:
                    raise InvariantError(f"missing correction for message {i}, outcome {j}")
                if corr.d_in != d2 or corr.d_out != d2:
                    raise DimensionMismatchError(f"correction ({i}, {j}) must map Q2 (dim {d2}) to itself")
        if self.input_class == "product":
            for i, s in enumerate(self.inputs):
                a, b = s.reduce([0]), s.reduce([1])
                if np.max(np.abs(np.kron(a.mat, b.mat) - s.mat)) > STRUCTURE_TOL:
                    raise InvariantError(f"input {i} is not a product state")
        elif self.input_class == "separable":
            if self.certificates is None or len(self.certificates) != len(self.inputs):
                raise InvariantError("separable inputs need one certificate per message")
            for i, (s, cert) in enumerate(zip(self.inputs, self.certificates)):
                w = np.array([t[0] for t in cert])
                if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
                    raise InvariantError(f"certificate {i} weights are not a distribution")
                mix = sum(wt * np.kron(a.mat, b.mat) for wt, a, b in cert)
                if np.max(np.abs(mix - s.mat)) > STRUCTURE_TOL:
                    raise InvariantError(f"certificate {i} does not reproduce its input")

    @property
    def dims(self) -> tuple[int, int]:
        return self.inputs[0].dims

    @property
    def n_messages(self) -> int:
        return len(self.inputs)


def trivial_feedback(probs, inputs, input_class, d_feedback: int, certificates=None) -> FeedbackProtocol:
    """A protocol whose instrument has a single outcome and whose corrections are identities."""
    d2 = inputs[0].dims[1]
    ident = KrausChannel([np.eye(d2)])
    return FeedbackProtocol(
        probs=np.asarray(probs, dtype=np.float64),
        inputs=tuple(inputs),
        input_class=input_class,
        instrument=Instrument.trivial(d_feedback),
        corrections={(i, 0): ident for i in range(len(inputs))},
        certificates=certificates,
    )


@dataclass
class ProtocolReport:
    info_q1: float
    info_q2_given_q1: float
    info_total: float
    chi1: float
    chi2: float
    per_message_states: CQState
    min_pt_eigenvalues: list[float]
    pre_feedback_states: CQState
    post_feedback_states: CQState
    input_class: str = "product"

    @property
    def chain_rule_residual(self) -> float:
        return abs(self.info_total - self.info_q1 - self.info_q2_given_q1)

    @property
    def min_pt_eigenvalue(self) -> float:
        return min(self.min_pt_eigenvalues)


def run_protocol(p: FeedbackProtocol, omega: KrausChannel, lam: KrausChannel,
                 chi1_ref: float = math.nan, chi2_ref: float = math.nan) -> ProtocolReport:
    """Simulate ``p`` with ``omega`` on Q1 and ``lam`` on Q2 and account the information."""
    d1, d2 = p.dims
    if omega.d_in != d1:
        raise DimensionMismatchError(f"first channel expects dim {omega.d_in}, Q1 has {d1}")
    if lam.d_in != d2:
        raise DimensionMismatchError(f"second channel expects dim {lam.d_in}, Q2 has {d2}")
    if p.instrument.d_in != omega.d_out:
        raise DimensionMismatchError("instrument must act on the first channel's output")
    d1o = p.instrument.d_out
    pre, post, final, pt = [], [], [], []
    for i, rho in enumerate(p.inputs):
        sigma = apply_kraus_on(omega.kraus, rho.mat, (d1, d2), 0)
        omega_i = np.zeros((d1o * d2, d1o * d2), dtype=np.complex128)
        for j, ops in p.instrument.outcomes:
            branch = apply_kraus_on(ops, sigma, (omega.d_out, d2), 0)
            omega_i += apply_kraus_on(p.corrections[(i, j)].kraus, branch, (d1o, d2), 1)
        tau = apply_kraus_on(lam.kraus, omega_i, (d1o, d2), 1)
        pre.append(DensityMatrix(sigma, (omega.d_out, d2)))
        post.append(DensityMatrix(omega_i, (d1o, d2)))
        final.append(DensityMatrix(tau, (d1o, lam.d_out)))
        pt.append(min_pt_eigenvalue(omega_i, (d1o, d2), 1))
    labels = range(p.n_messages)
    final_cq = CQState(zip(p.probs, labels, final))
    return ProtocolReport(
        info_q1=cq_mutual_information(final_cq, [0]),
        info_q2_given_q1=cq_conditional_mutual_information(final_cq, [1], [0]),
        info_total=cq_mutual_information(final_cq, [0, 1]),
        chi1=chi1_ref,
        chi2=chi2_ref,
        per_message_states=final_cq,
        min_pt_eigenvalues=pt,
        pre_feedback_states=CQState(zip(p.probs, labels, pre)),
        post_feedback_states=CQState(zip(p.probs, labels, post)),
        input_class=p.input_class,
    )


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------

@dataclass
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    tol: float

    @property
    def margin(self) -> float:
        """``rhs - lhs``; negative beyond ``-tol`` means a violation."""
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + self.tol


@dataclass
class VerificationVerdict:
    checks: list[BoundCheck]
    tol: float
    slack: tuple[float, float]
    report: ProtocolReport | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def violations(self) -> list[BoundCheck]:
        return [c for c in self.checks if not c.passed]

    @property
    def min_margin(self) -> float:
        return min(c.margin for c in self.checks)

    def summary(self) -> str:
        if self.passed:
            return f"pass (min margin {self.min_margin:.3e})"
        parts = [f"{c.name}: {c.lhs:.9f} > {c.rhs:.9f} + {c.tol:.1e}" for c in self.violations]
        return "fail: " + "; ".join(parts)


def _slacks(slack) -> tuple[float, float]:
    if np.isscalar(slack):
        return float(slack), float(slack)
    s1, s2 = slack
    return float(s1), float(s2)


def verify_product_bounds(report: ProtocolReport, chi1_ref: float, chi2_ref: float,
                          tol: float = BOUND_TOL, slack=GRID_SLACK) -> VerificationVerdict:
    """Check the per-use and total bounds against capacity references.

    ``chi*_ref`` must come from a closed form or the grid oracle. ``slack`` is
    the declared under-estimate of each reference (scalar or per channel).
    """
    s1, s2 = _slacks(slack)
    checks = [
        BoundCheck("q1_info_le_chi1", report.info_q1, chi1_ref, tol + s1),
        BoundCheck("q2_given_q1_info_le_chi2", report.info_q2_given_q1, chi2_ref, tol + s2),
        BoundCheck("total_info_le_chi_sum", report.info_total, chi1_ref + chi2_ref, tol + s1 + s2),
    ]
    return VerificationVerdict(checks, tol, (s1, s2), report)


def verify_eb_bound(p: FeedbackProtocol, omega: KrausChannel, lam: KrausChannel, chi2_ref: float,
                    chi1_ref: float | None = None, tol: float = BOUND_TOL, slack=GRID_SLACK) -> VerificationVerdict:
    """Run ``p`` through an entanglement-breaking first channel and check the bounds.

    Checks ``S(M Q1' : Q2') <= chi2`` and that it dominates ``S(M : Q2' | Q1')``;
    with ``chi1_ref`` also the first-use and total bounds.

    Raises
    ------
    HypothesisError
        If ``omega`` is not certified entanglement breaking.
    """
    verdict = is_entanglement_breaking(omega)
    if verdict.verdict != "yes":
        raise HypothesisError(
            f"first channel is not certified entanglement breaking "
            f"(verdict {verdict.verdict!r}, min PT eigenvalue {verdict.min_pt_eigenvalue:.3e})"
        )
    s1, s2 = _slacks(slack)
    report = run_protocol(p, omega, lam, math.nan if chi1_ref is None else chi1_ref, chi2_ref)
    memory_q1_q2 = cq_memory_mutual_information(report.per_message_states, [0], [1])
    checks = [
        BoundCheck("memory_q1_to_q2_info_le_chi2", memory_q1_q2, chi2_ref, tol + s2),
        BoundCheck("q2_given_q1_info_le_memory_q1_to_q2", report.info_q2_given_q1, memory_q1_q2, tol),
    ]
    if chi1_ref is not None:
        checks += [
            BoundCheck("q1_info_le_chi1", report.info_q1, chi1_ref, tol + s1),
            BoundCheck("total_info_le_chi_sum", report.info_total, chi1_ref + chi2_ref, tol + s1 + s2),
        ]
    return VerificationVerdict(checks, tol, (s1, s2), report)


def conditioning_gap(report: ProtocolReport) -> float:
    """``S(Q2') - S(Q2'|Q1')`` on the average output; never negative beyond rounding."""
    avg = report.per_message_states.average()
    return entropy(avg.reduce([1])) - conditional_entropy(avg, [1], [0])


def data_processing_gap(report: ProtocolReport) -> float:
    """``S(M:Q1')`` before the instrument minus after it."""
    return cq_mutual_information(report.pre_feedback_states, [0]) - report.info_q1


# --------------------------------------------------------------------------
# random protocols
# --------------------------------------------------------------------------

def _random_local_state(d: int, rng: np.random.Generator) -> DensityMatrix:
    return random_pure_state(d, rng) if rng.random() < 0.5 else random_state(d, rng)


def random_protocol(input_class: str, dims: Sequence[int] = (2, 2), n_messages: int = 4, rng_seed=None,
                    feedback_dim: int | None = None, n_outcomes: int | None = None) -> FeedbackProtocol:
    """Random protocol with inputs of the given class.

    ``feedback_dim`` is the dimension the instrument acts on (the first
    channel's output), defaulting to ``dims[0]``.
    """
    if input_class not in INPUT_CLASSES:
        raise ParameterError(f"input_class must be one of {INPUT_CLASSES}")
    if n_messages < 2:
        raise ParameterError("n_messages must be >= 2")
    d1, d2 = (int(d) for d in dims)
    if d1 < 1 or d2 < 1:
        raise ParameterError(f"invalid dims {dims}")
    df = d1 if feedback_dim is None else int(feedback_dim)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)

    probs = rng.dirichlet(np.ones(n_messages))
    inputs, certs = [], []
    for _ in range(n_messages):
        if input_class == "product":
            a, b = _random_local_state(d1, rng), _random_local_state(d2, rng)
            inputs.append(a @ b)
        elif input_class == "separable":
            n_terms = int(rng.integers(1, 5))
            w = rng.dirichlet(np.ones(n_terms))
            terms = [(float(wt), _random_local_state(d1, rng), _random_local_state(d2, rng)) for wt in w]
            mix = sum(wt * np.kron(a.mat, b.mat) for wt, a, b in terms)
            inputs.append(DensityMatrix(mix, (d1, d2)))
            certs.append(tuple(terms))
        else:
            if rng.random() < 0.5:
                inputs.append(DensityMatrix(random_pure_state(d1 * d2, rng).mat, (d1, d2)))
            else:
                inputs.append(random_state(d1 * d2, rng, rank=2, dims=(d1, d2)))
    if n_outcomes is None:
        n_outcomes = int(rng.integers(2, min(4, df * df) + 1))
    instrument = random_instrument(df, rng, n_outcomes=n_outcomes)
    corrections = {(i, j): random_channel(d2, d2, rng) for i in range(n_messages) for j in instrument.labels}
    return FeedbackProtocol(
        probs=probs,
        inputs=tuple(inputs),
        input_class=input_class,
        instrument=instrument,
        corrections=corrections,
        certificates=tuple(certs) if input_class == "separable" else None,
    )


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

ROW_FIELDS = (
    "trial_seed", "input_class", "info_q1", "info_q2_given_q1", "info_total",
    "chi1_ref", "chi2_ref", "excess", "min_pt_eigenvalue", "verdict",
)


def _row(seed, report: ProtocolReport, chi1, chi2, verdict: str) -> dict:
    return {
        "trial_seed": seed,
        "input_class": report.input_class,
        "info_q1": report.info_q1,
        "info_q2_given_q1": report.info_q2_given_q1,
        "info_total": report.info_total,
        "chi1_ref": chi1,
        "chi2_ref": chi2,
        "excess": report.info_total - (chi1 + chi2),
        "min_pt_eigenvalue": report.min_pt_eigenvalue,
        "verdict": verdict,
    }


@dataclass
class SweepResult:
    rows: list[dict]
    violations: int
    chain_rule_max_residual: float
    min_pt_eigenvalue: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def sweep_feedback_bounds(omega: KrausChannel, lam: KrausChannel, input_class: str, trials: int, seed: int,
                          chi1_ref: float, chi2_ref: float, tol: float = BOUND_TOL, slack=GRID_SLACK,
                          n_messages: int = 4) -> SweepResult:
    """Random protocols with product or separable inputs checked against the capacity sum."""
    if input_class == "entangled":
        raise HypothesisError("the capacity-sum bound is only asserted for product or separable inputs")
    rows, bad, chain, pt = [], 0, 0.0, math.inf
    for s in trial_seeds(seed, trials):
        proto = random_protocol(input_class, (omega.d_in, lam.d_in), n_messages, s, feedback_dim=omega.d_out)
        rep = run_protocol(proto, omega, lam, chi1_ref, chi2_ref)
        v = verify_product_bounds(rep, chi1_ref, chi2_ref, tol, slack)
        ok = v.passed and rep.min_pt_eigenvalue >= -STRUCTURE_TOL
        bad += not ok
        chain = max(chain, rep.chain_rule_residual)
        pt = min(pt, rep.min_pt_eigenvalue)
        rows.append(_row(s, rep, chi1_ref, chi2_ref, "pass" if ok else "fail"))
    return SweepResult(rows, bad, chain, pt)


def sweep_eb_bounds(omega: KrausChannel, lam: KrausChannel, trials: int, seed: int, chi1_ref: float,
                    chi2_ref: float, input_class: str = "entangled", tol: float = BOUND_TOL,
                    slack=GRID_SLACK, n_messages: int = 4) -> SweepResult:
    """Random protocols through an entanglement-breaking first channel."""
    rows, bad, chain, pt = [], 0, 0.0, math.inf
    for s in trial_seeds(seed, trials):
        proto = random_protocol(input_class, (omega.d_in, lam.d_in), n_messages, s, feedback_dim=omega.d_out)
        v = verify_eb_bound(proto, omega, lam, chi2_ref, chi1_ref, tol, slack)
        rep = v.report
        bad += not v.passed
        chain = max(chain, rep.chain_rule_residual)
        pt = min(pt, rep.min_pt_eigenvalue)
        rows.append(_row(s, rep, chi1_ref, chi2_ref, "pass" if v.passed else "fail"))
    return SweepResult(rows, bad, chain, pt)


@dataclass
class ExplorationReport:
    rows: list[dict]
    chi_ref: float
    max_excess: float
    argmax_seed: int | None

    def histogram(self, bins: int = 20):
        return np.histogram([r["excess"] for r in self.rows], bins=bins)


def explore_entangled_feedback(lam: KrausChannel, trials: int, rng_seed: int, n_messages: int = 4,
                               chi_ref: float | None = None, resolution: int = 24) -> ExplorationReport:
    """Observe ``info_total - 2 chi`` for random entangled-input protocols.

    Both uses go through ``lam``. Nothing is asserted; rows carry verdict
    ``"observed"``.
    """
    if lam.d_in != 2:
        raise DimensionMismatchError("exploration needs qubit channels so the reference is grid certified")
    chi = chi_grid_oracle_qubit(lam, resolution) if chi_ref is None else float(chi_ref)
    rows = []
    best, best_seed = -math.inf, None
    for s in trial_seeds(rng_seed, trials):
        proto = random_protocol("entangled", (2, 2), n_messages, s, feedback_dim=lam.d_out)
        rep = run_protocol(proto, lam, lam, chi, chi)
        row = _row(s, rep, chi, chi, "observed")
        rows.append(row)
        if row["excess"] > best:
            best, best_seed = row["excess"], s
    return ExplorationReport(rows, chi, best, best_seed)
