"""Every reference fit is KKT-certified once the epoch budget is large enough.

The acceptance suite holds the solver to 1000 epochs; this module records
that the same fits do converge, each well within the 5 s budget, when the
cap is lifted.
"""

import pytest

from tsvqr.core import Hyperparams, KernelSpec
from tsvqr.dcdm import SolverConfig
from tsvqr.model import fit
from tsvqr.synthetic import GeneratorSpec, generate

from test_acceptance import EPS, REFERENCE_SETTINGS


@pytest.mark.parametrize("family", sorted(REFERENCE_SETTINGS))
def test_reference_fits_certify_with_larger_budget(family):
    train, _ = generate(GeneratorSpec(family, seed=0))
    cs, p = REFERENCE_SETTINGS[family]
    for tau in (0.1, 0.5, 0.9):
        h = Hyperparams(c1=cs[tau], c2=cs[tau], eps1=EPS, eps2=EPS, tau=tau,
                        kernel=KernelSpec.gaussian(p),
                        solver=SolverConfig(tol=1e-6, max_epochs=100_000))
        m = fit(train, h)
        lo, up = m.diagnostics
        assert lo.converged and up.converged, (tau, lo.epochs_run, up.epochs_run)
        assert max(lo.final_pg_norm, up.final_pg_norm) <= 1e-6
        assert m.fit_seconds < 5.0
