"""Colour rendering, colour temperature and flux with and without data transmission."""

from nomacsk.illumination import illumination_compare

rows = illumination_compare(1 / 30)
base = rows[0].luminous_flux
print(f"{'case':>9} {'CRI':>7} {'CCT K':>9} {'flux lm':>9} {'ratio':>6}")
for row in rows:
    print(f"{row.label:>9} {row.cri_ra:7.2f} {row.cct:9.1f} {row.luminous_flux:9.2f} "
          f"{row.luminous_flux / base:6.3f}")
