"""Level data and comb arithmetic: spacings, echo times, Doppler widths.

The storage time of a divisor comb is fixed by the hyperfine splitting:
tau = 2*pi*(n+1)/splitting.  This prints the design table for the first
few divisors and the Doppler context that makes the D1 line the right
choice for velocity-selective pumping.
"""

import math

from afcsim import atoms

scheme = atoms.rb87_level_scheme()
TWO_PI = 2 * math.pi

print("Rb-87 D-line structure")
print(f"  ground splitting : {scheme.ground_splitting / TWO_PI / 1e9:.4f} GHz")
print(f"  D1 F'1-F'2       : {scheme.d1_splittings[(1, 2)] / TWO_PI / 1e6:.3f} MHz")
for pair, value in sorted(scheme.d2_splittings.items()):
    print(f"  D2 F'{pair[0]}-F'{pair[1]}       : {value / TWO_PI / 1e6:.3f} MHz")

print("\nDoppler FWHM at 26.9 C")
for line, lam in (("D1", scheme.d1_wavelength), ("D2", scheme.d2_wavelength)):
    width = atoms.doppler_fwhm(300.05, lam, scheme)
    print(f"  {line} ({lam * 1e9:.1f} nm): {width / 1e6:.0f} MHz")
print("  -> D1 hyperfine states resolved (817 MHz splitting), D2 not")

print("\nDivisor combs on the F'2-F'3 splitting")
print("  n   spacing (MHz)   echo time (ns)   classes for 3 teeth (m/s)")
for n in range(4):
    design = atoms.design_comb(scheme, (2, 3), n, sideband_indices=(-1, 0, 1))
    classes = ", ".join(f"{v:+.1f}" for v in design.velocity_classes)
    print(f"  {n}   {design.spacing / TWO_PI / 1e6:11.3f}   "
          f"{design.echo_time * 1e9:12.4f}   {classes}")

print("\nVapour density vs temperature")
for celsius in (20.0, 26.9, 35.0, 50.0):
    n = atoms.vapor_number_density(celsius + 273.15)
    print(f"  {celsius:5.1f} C : {n:.3e} m^-3")
