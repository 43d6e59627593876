import math
import xml.etree.ElementTree as ET

import numpy as np
from hypothesis import given, settings, strategies as st

from fermispec.export import (blocks_json, fmt_float, read_dispersion_csv, read_envelope_csv,
                              read_json, write_bottoms_csv, write_dispersion_csv,
                              write_envelope_csv, write_json)
from fermispec.exactdiag import ModeSet, build_blocks, finite_volume_spectrum
from fermispec.lattice import build_grid, free_dispersion, kinetic_energy, model_dispersion
from fermispec.quasispectrum import SpectrumEnvelope, region_raster, sector_hulls
from fermispec.svg import region_svg

SVG_NS = "{http://www.w3.org/2000/svg}"


@settings(max_examples=200, deadline=None)
@given(x=st.floats(allow_nan=False))
def test_float_format_round_trips(x):
    assert float(fmt_float(x)) == x or (x == 0.0 and float(fmt_float(x)) == 0.0)


def test_float_format_special_values():
    assert fmt_float(math.inf) == "inf"
    assert fmt_float(-0.0) == "0.0"
    assert fmt_float(0.1) == "0.1"


def test_envelope_csv_round_trip(tmp_path):
    g = build_grid(2, 8 * np.pi, 1.0)
    env = sector_hulls(model_dispersion(g, 1.0, 0.5))["essential_odd"]
    vals = env.values.copy()
    vals[0] = math.inf
    env = SpectrumEnvelope(g, vals, "essential_odd")
    path = tmp_path / "env.csv"
    write_envelope_csv(path, env)
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.startswith(b"kx,ky,value,sector\n")
    back = read_envelope_csv(path)
    np.testing.assert_array_equal(back["values"], env.values)
    np.testing.assert_array_equal(back["momenta"], g.points)
    assert set(back["sectors"]) == {"essential_odd"}


def test_dispersion_csv_round_trip(tmp_path):
    g = build_grid(1, 8 * np.pi, 4.0)
    w = model_dispersion(g, 1.0, 0.3)
    write_dispersion_csv(tmp_path / "w.csv", w)
    back = read_dispersion_csv(tmp_path / "w.csv", g)
    np.testing.assert_array_equal(back.values, w.values)
    assert back.label == "model"


def test_bottoms_csv_marks_missing_points(tmp_path):
    g = build_grid(1, 2 * np.pi, 1)
    fv = finite_volume_spectrum(build_blocks(ModeSet(g), kinetic_energy(g, 1.0)))
    write_bottoms_csv(tmp_path / "odd.csv", g, fv.bottoms_odd, "odd")
    back = read_envelope_csv(tmp_path / "odd.csv")
    np.testing.assert_array_equal(back["values"], [0.0, 1.0, 0.0])
    write_bottoms_csv(tmp_path / "none.csv", g, {}, "odd")
    assert np.all(np.isinf(read_envelope_csv(tmp_path / "none.csv")["values"]))


def test_json_is_sorted_and_stable(tmp_path):
    doc = {"b": np.float64(1.5), "a": [np.int64(2), math.inf], "c": np.arange(3)}
    write_json(tmp_path / "a.json", doc)
    write_json(tmp_path / "b.json", dict(reversed(list(doc.items()))))
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert read_json(tmp_path / "a.json") == {"a": [2, "inf"], "b": 1.5, "c": [0, 1, 2]}


def test_blocks_json_keys():
    g = build_grid(1, 2 * np.pi, 1)
    doc = blocks_json(build_blocks(ModeSet(g), kinetic_energy(g, 1.0)))
    assert "K=0;parity=+1;n=2" in doc["blocks"]
    assert len(doc["blocks"]) == sum(1 for _ in doc["blocks"])


def region(sector="essential_full", style="solid"):
    g = build_grid(1, 8 * np.pi, 4.0)
    w = free_dispersion(g, 1.0)
    h = sector_hulls(w)
    return region_raster(h[sector], [(w, style)], energy_max=3.0, energy_steps=61, title="t")


def test_svg_is_well_formed():
    root = ET.fromstring(region_svg(region(), momentum_range=(-2.5, 2.5)))
    assert root.tag == SVG_NS + "svg" and root.get("version") == "1.1"
    x, y, w, h = map(float, root.get("viewBox").split())
    assert x == -2.625 and x + w == 2.625 and y + h > 0
    rects = root.findall(f".//{SVG_NS}rect")
    assert rects
    paths = root.findall(f".//{SVG_NS}path")
    assert [p.get("class") for p in paths] == ["solid"]


def test_svg_dotted_curve_has_dasharray():
    root = ET.fromstring(region_svg(region("essential_even", "dotted")))
    (path,) = root.findall(f".//{SVG_NS}path")
    assert path.get("class") == "dotted" and path.get("stroke-dasharray")


def test_svg_rects_cover_membership():
    r = region()
    root = ET.fromstring(region_svg(r))
    de = r.energy_axis[1] - r.energy_axis[0]
    area = sum(float(e.get("width")) * float(e.get("height"))
               for e in root.findall(f".//{SVG_NS}rect"))
    dk = r.momenta[1] - r.momenta[0]
    assert math.isclose(area, r.membership.sum() * dk * de, rel_tol=1e-6)
