"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line with its runtime."""

import hashlib
import json
import time

import numpy as np

from teamgames.builtins import (
    guessing,
    guessing_communication,
    nonexistence,
    nonexistence_parameters,
    random_layered,
    random_signaling_free,
)
from teamgames.cli import run
from teamgames.coordinator import HistoryStrategy, coordination_to_pure, point, pure_to_coordination
from teamgames.serialize import load_strategies
from teamgames.solver import certify_nonexistence_tiny, solve_layered, solve_signaling_free
from teamgames.verifier import best_response, mixed_to_behavioral, nash_gap, pure_strategy, total_payoff

from games import tiny_games
from oracles.agent_level import agent_payoff
from oracles.belief_checks import (
    consistent_update_error,
    desk_specs,
    factorization_error,
    private_belief_error,
    random_profile,
    spib_sufficiency_gap,
)
from profiles import alice_strategy, bob_strategy, communication_profile, guessing_sigma_star

EPS = 0.1
THIRD = 1.0 / 3.0
NONEX = ["--builtin", "nonexistence", "--param", f"eps={EPS}"]


class Criterion:
    def __init__(self, number: int, limit: float, capsys):
        self.number, self.limit, self.capsys = number, limit, capsys
        self.failures: list[str] = []
        self.notes: list[str] = []

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def check(self, ok: bool, what: str) -> None:
        (self.notes if ok else self.failures).append(what)

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc_type is not None:
            self.failures.append(f"raised {exc_type.__name__}: {exc}")
        if elapsed >= self.limit:
            self.failures.append(f"took {elapsed:.2f}s")
        status = "FAIL" if self.failures else "PASS"
        detail = "; ".join(self.failures or self.notes[-1:])
        with self.capsys.disabled():
            print(f"\n{status} criterion {self.number} ({elapsed:.2f}s of {self.limit:g}s): {detail}")
        if exc_type is None:
            assert not self.failures, self.failures
        return False


def _close(a, b, tol) -> bool:
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))) <= tol


def test_criterion_1_unique_equilibrium(tmp_path, capsys):
    out = tmp_path / "eq.json"
    with Criterion(1, 1.0, capsys) as c:
        code = run(["enumerate-bne", *NONEX, "--out", str(out)])
        eqs = json.loads(out.read_text())["equilibria"]
        c.check(code == 0, f"exit {code}")
        c.check(len(eqs) == 1, f"{len(eqs)} equilibria")
        got = eqs[0]["parameters"]["p"] + eqs[0]["parameters"]["q"]
        c.check(_close(got, [THIRD, THIRD, THIRD + EPS, THIRD - EPS], 1e-9), f"one equilibrium at {got}")


def test_criterion_2_alice_value_table(capsys):
    table = [
        ((0, 0), EPS / 2), ((0.5, 0), EPS / 4 + 0.5), ((0, 0.5), 3 * EPS / 4 + 0.5), ((1, 0), 0.5),
        ((0, 1), EPS + 0.5), ((THIRD, THIRD), EPS / 2 + 2 / 3), ((1, 1), EPS / 2),
    ]
    spec = nonexistence(EPS)
    with Criterion(2, 5.0, capsys) as c:
        for (p1, p2), expected in table:
            profile = [alice_strategy(spec, p1, p2), bob_strategy(spec, 0.5, 0.5)]
            reply = best_response(spec, profile, 1)
            value = total_payoff(spec, [profile[0], reply.strategy])[0]
            c.check(abs(value - expected) <= 1e-9, f"p=({p1:.3f},{p2:.3f}) gives {value:.12f}, want {expected:.12f}")


def test_criterion_3_cib_nonexistence(tmp_path, capsys):
    out = tmp_path / "report.json"
    with Criterion(3, 10.0, capsys) as c:
        code = run(["solve", *NONEX, "--mode", "cib", "--out", str(out)])
        report = json.loads(out.read_text())
        c.check(code == 3, f"exit {code}")
        c.check(report["obstruction"]["stage"] == 3, f"obstruction at t={report['obstruction']['stage']}")
        cert = certify_nonexistence_tiny(nonexistence(EPS))
        c.check(cert.status == "CERTIFIED_NONE" and cert.stage == 3, f"certification {cert.status} at t={cert.stage}")


def test_criterion_4_spib_existence(tmp_path, capsys):
    prof, cert = tmp_path / "p.json", tmp_path / "c.json"
    spec = nonexistence(EPS)
    with Criterion(4, 30.0, capsys) as c:
        c.check(run(["solve", *NONEX, "--mode", "spib", "--out", str(prof)]) == 0, "solve exit code")
        c.check(run(["verify", *NONEX, "--profile", str(prof), "--out", str(cert)]) == 0, "verify exit code")
        eps = json.loads(cert.read_text())["epsilon"]
        c.check(eps <= 1e-6, f"epsilon {eps:.3e}")
        params = nonexistence_parameters(spec, load_strategies(spec, json.loads(prof.read_text())))
        c.check(_close(params, [THIRD, THIRD, THIRD + EPS, THIRD - EPS], 1e-3),
                f"epsilon {eps:.3e}, parameters {np.round(params, 6).tolist()}")


def test_criterion_5_guessing_certificate(capsys):
    spec = guessing()
    with Criterion(5, 5.0, capsys) as c:
        cert = nash_gap(spec, guessing_sigma_star(spec))
        ja, jb = cert.payoff
        c.check(cert.epsilon <= 1e-9, f"epsilon {cert.epsilon:.3e}")
        c.check(abs(ja) <= 1e-12 and abs(jb - 1) <= 1e-12, f"epsilon {cert.epsilon:.3e}, J = ({ja}, {jb})")


def test_criterion_6_communication_certificate(capsys):
    spec = guessing_communication()
    with Criterion(6, 10.0, capsys) as c:
        cert = nash_gap(spec, communication_profile(spec))
        c.check(cert.epsilon <= 1e-9, f"epsilon {cert.epsilon:.3e}")
        c.check(abs(cert.payoff[0] - 1.75) <= 1e-12, f"epsilon {cert.epsilon:.3e}, J^A = {cert.payoff[0]}")


def test_criterion_7_belief_oracles(capsys):
    with Criterion(7, 120.0, capsys) as c:
        worst = [0.0, 0.0, 0.0]
        for n, spec in enumerate(desk_specs(20)):
            worst[0] = max(worst[0], private_belief_error(spec, random_profile(spec, 7000 + n, full=True)))
            worst[1] = max(worst[1], consistent_update_error(spec, random_profile(spec, 7100 + n, full=False)))
            worst[2] = max(worst[2], factorization_error(spec, random_profile(spec, 7200 + n, full=True)))
        c.check(max(worst) <= 1e-10, "worst errors: private %.1e, update %.1e, factorization %.1e" % tuple(worst))


def _hashed_agent_rule(salt, spec, k):
    def mu(t, j, h0, xpriv, w):
        digest = hashlib.sha256(repr((salt, t, j, h0, xpriv, w)).encode()).digest()
        return digest[0] % spec.agent_action_dims(k, t)[j]
    return mu


def test_criterion_8_conversions(capsys):
    with Criterion(8, 60.0, capsys) as c:
        exact, worst = True, 0.0
        for n, (spec, pures) in enumerate(tiny_games(10, T=2, d=1)):
            mus = [_hashed_agent_rule((n, k), spec, k) for k in range(spec.n_teams)]
            lifted = [pure_to_coordination(spec, k, mus[k]) for k in range(spec.n_teams)]
            back = [coordination_to_pure(spec, k, lifted[k]) for k in range(spec.n_teams)]
            exact &= agent_payoff(spec, back) == agent_payoff(spec, mus)
            exact &= total_payoff(spec, lifted) == agent_payoff(spec, mus)
            rng = np.random.default_rng(800 + n)
            weights = [rng.dirichlet(np.ones(len(p))) for p in pures]
            behav = [HistoryStrategy(mixed_to_behavioral(pures[k], weights[k]), default=lambda *a: point(0))
                     for k in range(2)]
            mixed = np.zeros(2)
            for a, wa in zip(pures[0], weights[0]):
                for b, wb in zip(pures[1], weights[1]):
                    mixed += wa * wb * np.array(total_payoff(spec, [pure_strategy(a), pure_strategy(b)]))
            worst = max(worst, float(np.max(np.abs(np.array(total_payoff(spec, behav)) - mixed))))
        c.check(exact, "pure and coordination payoffs differ")
        c.check(worst <= 1e-10, f"pure/coordination exact; behavioral vs mixed worst {worst:.1e}")


def test_criterion_9_special_classes(capsys):
    with Criterion(9, 120.0, capsys) as c:
        worst = [0.0, 0.0]
        for seed in range(10):
            sol = solve_signaling_free(random_signaling_free(seed=seed))
            worst[0] = max(worst[0], sol.verifier_report["epsilon"])
            sol = solve_layered(random_layered(seed=seed))
            worst[1] = max(worst[1], sol.verifier_report["epsilon"])
        c.check(max(worst) <= 1e-6, "worst epsilon: signaling-free %.1e, layered %.1e" % tuple(worst))


def test_criterion_10_spi_sufficiency(capsys):
    with Criterion(10, 120.0, capsys) as c:
        worst = 0.0
        for n, spec in enumerate(desk_specs(20)):
            worst = max(worst, spib_sufficiency_gap(spec, random_profile(spec, 9000 + n, full=False)))
        c.check(worst <= 1e-10, f"worst restricted vs full-history gap {worst:.1e}")
