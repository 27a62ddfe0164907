"""Provenance block written into every JSON artifact."""
from __future__ import annotations

SCHEMA_VERSION = 1
QUADRATURE = "trapezoid"

# Identifiers of the implementation choices that shape numerical output.
DESIGN_DECISIONS = (
    "DD01 computation on the normalized domain [0,1]; native units only at I/O",
    "DD02 linear interpolation for every off-grid evaluation",
    "DD03 inverse of a flat warping piece maps to its left end",
    "DD04 DP predecessor window of W grid steps per axis (exhaustive for T<=60)",
    "DD05 sup bound applied to node times: |k-l| <= floor(nu_norm*T)",
    "DD06 DP ties within 1e-12 relative: slope nearest 1, then smallest k'",
    "DD07 fixed delay closed by a flat piece at 1",
    "DD08 segment and distance integrals by the trapezoid rule",
    "DD09 spline lambda by GCV over 61 log-spaced values, 1e-8..1e4 x n/tr(K)",
    "DD10 kernel bandwidth is the Gaussian standard deviation",
    "DD11 generated warpings need t3-t2 > 2 eta",
    "DD12 warping knots by rejection of sorted uniforms, plateaus >= 2 steps",
    "DD13 Wiener increments N(0, dt) with dt in grid units",
    "DD14 Philox streams from SeedSequence((seed, tag, i, j))",
    "DD15 gamma eta draws outside (0, span/4) are redrawn",
    "DD16 independent random intercept and slope",
    "DD17 Woodbury 2x2 sufficient statistics for REML",
    "DD18 variance components floored at 1e-10 var(y)",
    "DD19 Nelder-Mead on log variances, 3 jittered restarts, 1e-8 relative",
)


def metadata(command: str, flags: dict, window=None, **extra) -> dict:
    from . import __version__

    out = {
        "tool": "elastic-ea",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "flags": flags,
        "quadrature": QUADRATURE,
        "window": window,
        "design_decisions": list(DESIGN_DECISIONS),
    }
    out.update(extra)
    return out
