import math
import xml.etree.ElementTree as ET

from avgtransfer.svg import Figure

NS = "{http://www.w3.org/2000/svg}"


def test_polyline_splits_at_gaps_and_escapes_text(tmp_path):
    fig = Figure((-1, 1), (0, 2), title="a < b & c")
    fig.polyline([-1, -0.5, math.nan, 0.5, 1], [0, 1, 1, 1, 2], color="#ff0000")
    fig.marker(0.0, 1.0, label="saddle")
    fig.legend([("branch", "#ff0000")])
    p = tmp_path / "f.svg"
    fig.save(p)
    root = ET.parse(p).getroot()
    assert root.tag == NS + "svg"
    lines = [e for e in root.iter(NS + "polyline") if e.get("stroke") == "#ff0000"]
    assert len(lines) == 2
    assert any("a < b & c" == (t.text or "") for t in root.iter(NS + "text"))
