"""numba kernels and their numpy fallbacks must agree."""
import json
import os
import subprocess
import sys

import numpy as np

from qfeedback import _accel
from qfeedback.moments import FIG1_INITIAL, _rk4_kernel
from qfeedback.quadratures import FeedbackGains
from qfeedback.trajectories import EnsembleSpec, GaussianTrajectoryState, run_ensemble

SPEC = EnsembleSpec(n_traj=70, tau_end=3.0, kappa=0.25, gains=FeedbackGains(0.03, -0.25),
                    initial=GaussianTrajectoryState(0.0, 1.0, FIG1_INITIAL))


def test_ensemble_backends_match():
    a = run_ensemble(SPEC, use_numba=True)
    b = run_ensemble(SPEC, use_numba=False)
    assert np.allclose(a.mean_E, b.mean_E, rtol=0, atol=1e-13)
    assert np.allclose(a.terminal, b.terminal, rtol=0, atol=1e-13)


def test_rk4_python_and_compiled():
    args = (FIG1_INITIAL.x, FIG1_INITIAL.y, FIG1_INITIAL.z, 0.5, 1.0, 1.0, 1.0, 1e-3, 2000, 10)
    py = getattr(_rk4_kernel, "py_func", _rk4_kernel)
    a, _ = _rk4_kernel(*args)
    b, _ = py(*args)
    assert np.array_equal(a, b)


def test_env_flag_disables_jit():
    code = ("import json, qfeedback._accel as a, qfeedback.moments as m;"
            "print(json.dumps([a.backend(), hasattr(m._rk4_kernel, 'py_func')]))")
    env = dict(os.environ, QFEEDBACK_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert json.loads(out.stdout) == ["numpy", False]
    assert _accel.backend() in ("numba", "numpy")
