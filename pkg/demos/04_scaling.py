"""
Cost of one inner pass against the channel count
================================================

Source steering touches ``m`` rows per sub-step, while the projection
solvers rebuild ``m`` weighted covariances and solve linear systems, one
power of ``m`` more. The log-log slope of pass time makes this visible.
"""

from mmiva.experiment import scaling_bench

res = scaling_bench(m_list=(8, 16, 32, 64), n=256, K=8, reps=5)
print(f"{'m':>4s} " + " ".join(f"{s:>9s}" for s in res.times))
for i, m in enumerate(res.m_list):
    print(f"{m:4d} " + " ".join(f"{res.fitted_ms(s)[i]:9.3f}" for s in res.times))
for s, slope in res.slopes.items():
    print(f"{s}: ms per pass grows like m^{slope:.2f}")
