"""Shared fixtures.

GOLDEN holds reference values computed independently with mpmath at 50
digits (quadratic formula, bisection on psi', mp.quad for integrals) and
frozen here; tests assert the implementation reproduces them.
"""
import os

import pytest

from dividend_game import ClosedForm, ModelParams

GOLDEN = {
    "zeta1": -4.4769011027241786083,
    "zeta2": 0.3102344360575119416,
    "B": 1.1152214468456419001,
    "psi_B": 0.29382652829638997715,
    "psi1_B": 0.09794217609879665905,
    "p_hat": 0.90205782390120334095,
    "V1_at_0": 10.210106001639943537,
    "p0": 0.72164625912096267276,          # 0.8 * p_hat
    "b_p0": 0.26823475298057911199,
    "x0": 0.13411737649028955600,          # b(p0) / 2
    "b_at_72165": 0.26823093356759620472,
    "v_at_134_72165": 0.29302626799068691482,
    "u_at_134_72165": 0.16847619120798126944,
    "v_at_x0_p0": 0.29322392558744384259,
    "u_at_x0_p0": 0.16858858956684704071,
    "lambda_B": 1.6900486970416296213,
    "Lambda0_B": 1.5024803202869353139,    # integral of lambda over [0, B]
    "Lambda_bp0_B": 1.4112485654321854527,  # integral over [b(p0), B]
    "y_cap_p0": 2.5264700122778273528,     # Lambda(B) + B at p0
    "psi_x0": 0.10317443288375322243,
    "golden_zeta2": 0.6180339887498948482,  # (sqrt(5)-1)/2
}

# Equilibrium value surfaces at the acceptance states, same oracle.
GOLDEN_STATES = {
    (0.134, 0.722): (0.292657813908428102, 0.168380754437856106),
    ("b_p0", "p0"): (0.466537192404454391, 0.268234752980579112),
    (0.05, 0.3): (0.322771751975782831, 0.115033458467602033),
    (0.5, 0.1): (2.03696006198632716, 0.678726182946983698),
    (1.5, 0.3): (2.5967376482062757, 0.607309911784867267),
    (0.5, 0.0): (2.26328895776258573, 0.841356128701918585),
}


def fast_mode() -> bool:
    """Shrink the heavy Monte Carlo scales during development runs."""
    return os.environ.get("DIVIDEND_GAME_FAST", "") == "1"


@pytest.fixture(scope="session")
def params() -> ModelParams:
    return ModelParams(mu=0.03, sigma=0.12, r=0.01)


@pytest.fixture(scope="session")
def cf(params) -> ClosedForm:
    return ClosedForm.solve(params)
