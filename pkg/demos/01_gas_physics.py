"""Gas-physical building blocks.

Walks through the closed-form quantities the models rely on: pipe
friction, compressibility, the fixed-velocity linearization constants,
adiabatic head and compression power.
"""

from stationopt.gas import (
    GasConstants,
    adiabatic_head,
    compression_power,
    cross_section_area,
    nikuradse_friction,
    papay_z,
    pipe_velocity_constant,
    ratio_from_head,
)

constants = GasConstants(
    specific_gas_constant=500.0,  # J/(kg K)
    temperature=283.15,  # K
    pseudo_critical_pressure=46.0,  # bar
    pseudo_critical_temperature=190.0,  # K
    normal_density=0.785,  # kg/m^3
)

print("== friction factor (fully turbulent) ==")
for diameter, roughness in ((1.0, 0.001), (1.0, 0.01), (0.5, 1e-5)):
    lam = nikuradse_friction(diameter, roughness)
    print(f"  D={diameter:5.2f} m  k={roughness:7.5f} m  ->  lambda = {lam:.6f}")

print("\n== compressibility along the pressure range ==")
for p in (0.0, 20.0, 50.0, 80.0, 100.0):
    print(f"  z({p:5.1f} bar) = {papay_z(p, constants):.5f}")

print("\n== fixed-velocity constant for a pipe end ==")
area = cross_section_area(0.5)
for q0 in (0.0, 60.0, 120.0):
    v = pipe_velocity_constant(50e5, q0, area, 0.9, constants)
    print(f"  initial flow {q0:6.1f} kg/s  ->  v = {v:7.3f} m/s")

print("\n== adiabatic head and drive power ==")
print(f"  {'ratio':>6} {'head J/kg':>12} {'power @ 150 kg/s, eta=0.85':>28}")
for ratio in (1.0, 1.2, 1.5, 1.8):
    head = adiabatic_head(ratio, 0.9, constants)
    power = compression_power(150.0, 50e5, 50e5 * ratio, 0.9, 0.85, constants)
    print(f"  {ratio:6.2f} {head:12.1f} {power / 1e6:25.3f} MW")

print("\n== head inverts back to the pressure ratio ==")
for ratio in (1.1, 1.6, 2.4):
    head = adiabatic_head(ratio, 0.9, constants)
    back = ratio_from_head(head, 0.9, constants)
    print(f"  ratio {ratio:4.2f} -> head {head:9.1f} -> ratio {back:.12f}")
