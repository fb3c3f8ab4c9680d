#!/usr/bin/env python3
"""Regenerate the Lambert-93 projection oracle fixture.

Transforms a set of EPSG:2154 planar coordinates to EPSG:4326 geodetic
coordinates with PROJ (libproj via ctypes) and writes them as CSV to stdout.
The geodesy tests compare the library's own inverse projection against the
committed copy of this file (tests/data/lcc2154_oracle.csv).

Two independent PROJ paths are evaluated and cross-checked:
  * the registered EPSG:2154 -> EPSG:4326 transformation, and
  * a raw +proj=lcc pipeline with the published Lambert-93 parameters.

Usage: python3 tools/make_projection_fixture.py > tests/data/lcc2154_oracle.csv
"""

import ctypes
import math
import sys

PJ_FWD = 1
PJ_INV = -1

LAMBERT93 = (
    b"+proj=lcc +lat_1=44 +lat_2=49 +lat_0=46.5 +lon_0=3 "
    b"+x_0=700000 +y_0=6600000 +ellps=GRS80 +units=m +no_defs"
)

GRID_EASTINGS = [50000.0, 350000.0, 650000.0, 950000.0, 1250000.0]
GRID_NORTHINGS = [6050000.0, 6325000.0, 6600000.0, 6875000.0, 7150000.0]

# Off-grid probe points, including planar values far outside the usual
# Lambert-93 window (the encoding pipeline feeds median-centered values
# straight into the inverse projection).
EXTRA_POINTS = [
    ("false_origin", 700000.0, 6600000.0),
    ("probe", 650000.0, 6800000.0),
    ("centered_false_origin", 210646.41, 12447.80),
    ("centered_zero", 0.0, 0.0),
]


def load_proj():
    for name in ("libproj.so.22", "libproj.so", "libproj.so.25"):
        try:
            return ctypes.CDLL(name)
        except OSError:
            continue
    raise SystemExit("libproj not found")


def bind(proj):
    proj.proj_context_create.restype = ctypes.c_void_p
    proj.proj_create.restype = ctypes.c_void_p
    proj.proj_create.argtypes = [ctypes.c_void_p, ctypes.c_char_p]
    proj.proj_create_crs_to_crs.restype = ctypes.c_void_p
    proj.proj_create_crs_to_crs.argtypes = [
        ctypes.c_void_p, ctypes.c_char_p, ctypes.c_char_p, ctypes.c_void_p]
    proj.proj_normalize_for_visualization.restype = ctypes.c_void_p
    proj.proj_normalize_for_visualization.argtypes = [ctypes.c_void_p, ctypes.c_void_p]
    proj.proj_trans_generic.restype = ctypes.c_size_t
    proj.proj_trans_generic.argtypes = [
        ctypes.c_void_p, ctypes.c_int,
        ctypes.POINTER(ctypes.c_double), ctypes.c_size_t, ctypes.c_size_t,
        ctypes.POINTER(ctypes.c_double), ctypes.c_size_t, ctypes.c_size_t,
        ctypes.POINTER(ctypes.c_double), ctypes.c_size_t, ctypes.c_size_t,
        ctypes.POINTER(ctypes.c_double), ctypes.c_size_t, ctypes.c_size_t]


def trans(proj, pj, direction, x, y):
    cx = ctypes.c_double(x)
    cy = ctypes.c_double(y)
    n = proj.proj_trans_generic(
        pj, direction,
        ctypes.byref(cx), 8, 1,
        ctypes.byref(cy), 8, 1,
        None, 0, 0,
        None, 0, 0)
    if n != 1:
        raise RuntimeError(f"proj_trans_generic failed for ({x}, {y})")
    return cx.value, cy.value


def main():
    proj = load_proj()
    bind(proj)
    ctx = proj.proj_context_create()

    crs_pj = proj.proj_create_crs_to_crs(ctx, b"EPSG:2154", b"EPSG:4326", None)
    if not crs_pj:
        raise SystemExit("failed to create EPSG:2154 -> EPSG:4326 transform")
    crs_pj = proj.proj_normalize_for_visualization(ctx, crs_pj)

    raw_pj = proj.proj_create(ctx, LAMBERT93)
    if not raw_pj:
        raise SystemExit("failed to create raw Lambert-93 pipeline")

    rows = []
    for n in GRID_NORTHINGS:
        for e in GRID_EASTINGS:
            rows.append(("grid", e, n))
    rows.extend(EXTRA_POINTS)

    out = []
    for tag, e, n in rows:
        lon_crs, lat_crs = trans(proj, crs_pj, PJ_FWD, e, n)
        lam, phi = trans(proj, raw_pj, PJ_INV, e, n)
        lon_raw = math.degrees(lam)
        lat_raw = math.degrees(phi)
        if math.isfinite(lon_crs) and math.isfinite(lat_crs):
            if abs(lon_crs - lon_raw) > 1e-9 or abs(lat_crs - lat_raw) > 1e-9:
                raise SystemExit(
                    f"PROJ paths disagree at ({e}, {n}): "
                    f"({lon_crs}, {lat_crs}) vs ({lon_raw}, {lat_raw})")
            lon, lat = lon_crs, lat_crs
        else:
            lon, lat = lon_raw, lat_raw
        out.append((tag, e, n, lon, lat))

    sys.stdout.write("tag,easting,northing,lon_deg,lat_deg\n")
    for tag, e, n, lon, lat in out:
        sys.stdout.write(f"{tag},{e:.17g},{n:.17g},{lon:.17g},{lat:.17g}\n")


if __name__ == "__main__":
    main()
