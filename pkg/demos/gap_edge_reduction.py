"""Reduce the almost Mathieu cocycle at a gap edge, then take one KAM step.

The edge at E0 reduces to a parabolic form [[s, a], [0, s]]. Moving the
energy by eps leaves an O(eps^2) remainder after one step (halving eps
quarters it), and the sign of det(Z0 + eps Z1) says on which side the
gap opens.
"""

from gaplab.frequency import golden
from gaplab.reducibility import gap_certificate, kam_step, reduce_pipeline

lam, alpha = 0.05, golden(30)
E0 = -0.7757219870081623

run = reduce_pipeline(lam, alpha, E0, n_rho=20_000)
print(f"case {run.case}, normal form {run.normal_form}")
for rec in run.ledger:
    print(f"  {rec['stage']:<10s} {rec['quantity']:<36s} {rec['value']:.3e}")

rep = kam_step(run.B, lam, run.E, alpha, (1e-3, 5e-4), Z=run.normal_form)
print(f"residuals {rep.residuals[0]:.3e}, {rep.residuals[1]:.3e}  ratio {rep.ratio:.4f}")
cert = gap_certificate(run.normal_form, rep.P_mean, [1e-3, -1e-3])
for v in cert.verdicts:
    print(f"  eps = {v.epsilon:+.0e}: d = {v.d:+.3e} -> {v.verdict}")
