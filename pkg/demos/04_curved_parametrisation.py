"""A non-affine parametrisation of the same cylinder.

The spatial direction is mapped by a quadratic B-spline with a shifted
middle control point, so Jacobians vary in space and second derivatives
pick up the Hessian correction. The geometry file below is the plain-text
control-net format read by the harness (``geometry = file:<path>``).
"""

import tempfile
from pathlib import Path

from stiga.study import emit_csv, parse_config_text, read_control_net, run_study

net = """\
degree 2
knots 0 0 0 1 1 1          # x
knots 0 0 0 1 1 1          # t
point 0.0 0.0
point 0.0 0.5
point 0.0 1.0
point 0.35 0.0             # middle column pulled left
point 0.35 0.5
point 0.35 1.0
point 1.0 0.0
point 1.0 0.5
point 1.0 1.0
"""

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "curved.txt"
    path.write_text(net)
    g = read_control_net(path)
    print("spatial bounding box:", g.spatial_bounding_box())
    cfg = parse_config_text(f"case = MS1\ndegree = 2\nlevels = 2-5\nmajorant = II\nflux = minimized\ngeometry = file:{path}\ntimings = off\n")
    emit_csv(run_study(cfg))
