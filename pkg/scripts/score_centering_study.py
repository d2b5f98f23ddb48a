"""Size of the mean-homogeneity test under the two score choices.

``cross_section`` feeds the HAC estimator with x_it minus the period
average, the series behind sqrt(T)(xbar_i - xbar); ``unit`` feeds it the raw
unit series.
"""

from dataclasses import dataclass

import numpy as np
from jobconfig import floats, parse_job

from panelinfer import _rng
from panelinfer.dgp import Ar1PanelSpec, simulate_ar1_panel
from panelinfer.homogeneity import test_homogeneity
from panelinfer.longrun import default_kernel


@dataclass
class CenteringJob:
    N: int = 30
    T: int = 100
    reps: int = 300
    boot: int = 199
    rho_nu: str = "0.5,0.95"
    seed: int = 7
    level: float = 0.95


def main(argv=None):
    job = parse_job(CenteringJob, __doc__, argv)
    k = default_kernel(job.T)
    print(f"N={job.N} T={job.T} reps={job.reps}, nominal {1 - job.level:.2f}")
    for rho in floats(job.rho_nu):
        spec = Ar1PanelSpec.toeplitz(np.zeros(job.N), 0.3, rho)
        counts = {"cross_section": 0, "unit": 0}
        for r in range(job.reps):
            p = simulate_ar1_panel(spec, job.T, job.seed, r)
            bs = _rng.derived_seed(job.seed, r, _rng.BOOTSTRAP)
            for center in counts:
                counts[center] += test_homogeneity(p, k, job.boot, (job.level,), bs, center=center).decisions[job.level]
        rates = "  ".join(f"{c}: {n / job.reps:.3f}" for c, n in counts.items())
        print(f"  rho_nu={rho}: {rates}")


if __name__ == "__main__":
    main()
