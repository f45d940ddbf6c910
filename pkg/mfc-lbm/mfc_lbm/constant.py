#: Physical constants
faraday_c_per_mol = 96485.0
gas_constant_j_per_mol_k = 8.314
standard_temperature_k = 298.15

#: Conversions
hours_per_day = 24.0
seconds_per_hour = 3600.0
litre_per_mm3 = 1e-6

#: Anode compartment, X x Y x Z in mm. The lattice spans Y x Z, X is the depth.
compartment_depth_mm = 17.0
compartment_width_mm = 60.0
compartment_height_mm = 65.0
electrode_width_mm = 48.0

#: Lattice Boltzmann guards
low_mach_velocity_limit = 0.3
stable_relaxation_time = 0.5
