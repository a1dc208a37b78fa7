"""Regenerate the bundled CIE tables in src/nomacsk/data/.

Requires the ``colour-science`` package, which is only needed here; the
library itself reads the exported text files.

    python tools/export_cie_data.py
"""

from pathlib import Path

import numpy as np
import colour
from colour.colorimetry.datasets.illuminants.sds_d_illuminant_series import (
    SDS_BASIS_FUNCTIONS_CIE_ILLUMINANT_D_SERIES,
)
from colour.quality.datasets.tcs import SDS_TCS

OUT = Path(__file__).resolve().parents[1] / "src" / "nomacsk" / "data"
SHAPE = colour.SpectralShape(380, 780, 1)
VERSION = "# nomacsk-cie-data v1"


def _write(name, header, columns):
    wl = np.arange(380, 781)
    table = np.column_stack([wl] + columns)
    lines = [VERSION, f"# {header}", "# " + " ".join(["wavelength_nm"] + header.split(": ")[1].split(", "))]
    lines += [" ".join([f"{int(row[0])}"] + [f"{v:.8g}" for v in row[1:]]) for row in table]
    (OUT / name).write_text("\n".join(lines) + "\n")


def main():
    cmfs = colour.MSDS_CMFS["CIE 1931 2 Degree Standard Observer"].copy().align(SHAPE)
    _write("cie1931_2deg_cmf.txt", "CIE 1931 2-degree colour matching functions: xbar, ybar, zbar",
           [cmfs.values[:, k] for k in range(3)])

    tcs = SDS_TCS
    cols = [tcs[f"TCS0{k}"].copy().align(SHAPE).values for k in range(1, 9)]
    _write("cie_tcs_1_8.txt", "CIE 13.3 test colour sample reflectances: " + ", ".join(f"tcs{k}" for k in range(1, 9)), cols)

    basis = [SDS_BASIS_FUNCTIONS_CIE_ILLUMINANT_D_SERIES[k].copy().align(SHAPE).values for k in ("S0", "S1", "S2")]
    _write("cie_daylight_basis.txt", "CIE daylight basis functions: s0, s1, s2", basis)


if __name__ == "__main__":
    main()
