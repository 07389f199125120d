"""The canonical claim suite behind ``verify --all`` and ``report``."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from . import bounds, search, stopping
from .dist import WeightVector, prob_in_interval
from .report import VerificationReport, merge_reports

CANONICAL_CLAIMS = (
    "G_quarter_value", "F_quarter_value", "c_star_value", "corollary_2_7",
    "G_dominates_F", "h_k_ge_G_quarter", "half_mix_ge_G_quarter", "concavity_xi_3_4",
    "endpoint_chain", "L_max_sqrt3", "bd_sharpness", "lemma2_quarter", "lemma2_2_7",
    "theorem_batch", "stopping_certificates",
)
EXTRA_CLAIMS = ("bd_bound", "concavity_xi_minus_5_4", "engine_equivalence")


@dataclass
class SuiteConfig:
    seed: int = search.DEFAULT_SEED
    trials: int | None = None  # overrides every batch size when set
    threads: int = 1
    grid_step: float = 1e-3
    theorem_n_max: int = 20
    stopping_instances: int = 100
    stopping_n_max: int = 14

    def batch(self, default: int) -> int:
        return default if self.trials is None else self.trials


def _value_claim(claim_id: str, value, target, tol) -> VerificationReport:
    gap = abs(value - target)
    return VerificationReport(claim_id, gap <= tol, float(tol - gap), None, {"tolerance": tol},
                              {"value": value, "target": target})


def stopping_certificates(cfg: SuiteConfig) -> VerificationReport:
    """theorem_certificate on fixed examples plus seeded unit instances with n <= 14."""
    fixed = [
        WeightVector.from_rationals(["1/2"] * 4),
        WeightVector.from_rationals([1, 0, 0, 0]),
        WeightVector.from_squares([Fraction(1, 9)] * 9),
        WeightVector.from_rationals(["1/2", "1/2", "2/5", "2/5", "1/5", "1/5", "1/10", "1/10"]),
    ]
    parts = []
    branches: dict[str, int] = {}
    for i, w in enumerate(fixed):
        cert = stopping.theorem_certificate(w)
        branches[cert.branch] = branches.get(cert.branch, 0) + 1
        r = cert.report()
        r.worst_point = {"instance": f"fixed-{i}", **r.worst_point}
        parts.append(r)
    for ordinal in range(cfg.stopping_instances):
        w, meta = search.random_instance(cfg.seed, ordinal, cfg.stopping_n_max, n_min=2)
        cert = stopping.theorem_certificate(w)
        branches[cert.branch] = branches.get(cert.branch, 0) + 1
        r = cert.report()
        r.worst_point = {"instance": ordinal, **r.worst_point}
        parts.append(r)
    merged = merge_reports("stopping_certificates", parts)
    merged.grid_spec = {"instances": len(parts), "n_max": cfg.stopping_n_max, "seed": cfg.seed}
    merged.details = {"branches": branches, "failed": [p.worst_point for p in parts if not p.passed]}
    return merged


def engine_equivalence(cfg: SuiteConfig, instances: int = 200) -> VerificationReport:
    """naive and meet-in-the-middle counts agree on seeded instances."""
    mismatches = []
    for ordinal in range(instances):
        w, meta = search.random_instance(cfg.seed, ordinal, 20, n_min=2)
        if ordinal % 2:
            # exact mode: rational rounding of the same weights
            w = WeightVector.from_rationals([Fraction(round(v * 1000), 1000) for v in w.weights])
        a = prob_in_interval(w, -1, 1, "naive")
        b = prob_in_interval(w, -1, 1, "mim")
        if a.numerator != b.numerator:
            mismatches.append(meta["ordinal"])
    margin = -float(len(mismatches)) if mismatches else 0.0
    return VerificationReport("engine_equivalence", not mismatches, margin,
                              mismatches[:10] or None, {"instances": instances, "seed": cfg.seed})


def claim_registry(cfg: SuiteConfig) -> dict[str, Callable[[], VerificationReport]]:
    def concavity(claim_id, xi):
        def run():
            rep = bounds.check_concavity(xi, 0.0, 4 / 9, 1000)
            return VerificationReport(
                claim_id, rep.passed,
                bounds.CONCAVITY_TOL - max(rep.max_second_difference,
                                           rep.max_closed_form_second_derivative),
                None, {"interval": [0.0, 4 / 9], "grid_size": 1000}, rep.to_dict())
        return run

    def relabel(report, claim_id):
        report.claim_id = claim_id
        return report

    return {
        "G_quarter_value": lambda: _value_claim("G_quarter_value", bounds.eval_G(0.25), 0.42768, 1e-5),
        "F_quarter_value": lambda: VerificationReport(
            "F_quarter_value", bounds.eval_F(Fraction(1, 4)) == Fraction(13, 32), 0.0, None, {},
            {"value": bounds.eval_F(Fraction(1, 4))}),
        "c_star_value": lambda: _value_claim("c_star_value", bounds.C_STAR, 3.178, 1e-3),
        "corollary_2_7": lambda: _value_claim("corollary_2_7", bounds.eval_G(2 / 7), 0.40246, 1e-5),
        "G_dominates_F": lambda: bounds.check_G_dominates_F(8.0, cfg.grid_step),
        "h_k_ge_G_quarter": lambda: bounds.check_h_sequence(64),
        "half_mix_ge_G_quarter": lambda: bounds.check_half_mix_sequence(64),
        "concavity_xi_3_4": concavity("concavity_xi_3_4", 0.75),
        "endpoint_chain": bounds.check_endpoint_value,
        "L_max_sqrt3": lambda: bounds.check_L_max(8.0, cfg.grid_step),
        "bd_sharpness": search.bd_sharpness,
        "lemma2_quarter": lambda: relabel(search.verify_lemma2_batch(
            0.25, cfg.batch(500), cfg.seed, threads=cfg.threads), "lemma2_quarter"),
        "lemma2_2_7": lambda: relabel(search.verify_lemma2_batch(
            2 / 7, cfg.batch(500), cfg.seed, threads=cfg.threads), "lemma2_2_7"),
        "theorem_batch": lambda: search.verify_theorem_batch(
            cfg.batch(1000), cfg.theorem_n_max, cfg.seed, threads=cfg.threads),
        "stopping_certificates": lambda: stopping_certificates(cfg),
        "bd_bound": lambda: search.verify_bd_batch(cfg.batch(500), seed=cfg.seed, threads=cfg.threads),
        "concavity_xi_minus_5_4": concavity("concavity_xi_minus_5_4", -1.25),
        "engine_equivalence": lambda: engine_equivalence(cfg),
    }


def run_claims(names, cfg: SuiteConfig | None = None) -> list[VerificationReport]:
    cfg = cfg or SuiteConfig()
    registry = claim_registry(cfg)
    unknown = [n for n in names if n not in registry]
    if unknown:
        raise KeyError(f"unknown claim(s): {', '.join(unknown)}")
    return [registry[n]() for n in names]


def report_all(cfg: SuiteConfig | None = None) -> list[VerificationReport]:
    """The fifteen canonical claims, in their fixed order."""
    return run_claims(CANONICAL_CLAIMS, cfg)
