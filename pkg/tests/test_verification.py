import numpy as np

from src.models.kinetic_models import ModelSpec
from src.models.operators import DensityOp
from src.services.verification import VerificationSuite

free_spec = ModelSpec(d=2, phi=(0.0, 0.0))
initial = DensityOp(n=1, d=2, data=np.diag([0.7, 0.3]), state=True)


def test_free_model_passes_every_suite():
    reports = VerificationSuite(free_spec, initial).run()

    failed = [r for r in reports if not r.passed]
    assert not failed, failed


def test_free_model_graded_rows_cover_three_degrees():
    reports = VerificationSuite(free_spec, initial).gqke_reports()

    graded = [r for r in reports if r.name.startswith("graded_functional")]
    assert [r.name for r in graded] == [f"graded_functional[s=2,K={k},interval]" for k in (1, 2, 3)]
    assert all(r.measured <= 1e-9 for r in graded)
    assert "gqke_consistency_order_gain" not in {r.name for r in reports}
