# Optimization and verification defaults
# Modify these settings to adjust search grids, truncations and tolerances.
# models.py reads its field defaults from here.

# Search grids (start, stop, step), both ends inclusive
GRID_CONFIG = {
    'alpha2': (0.20, 0.60, 0.05),   # values of alpha^2
    'gamma': (0.02, 2.00, 0.02),    # gamma in (0, 2]
    'kappa': (0.1, 30.0, 0.1),      # kappa in (0, 30]
    'x_th': (0.00, 1.20, 0.05),     # postselection threshold
}

# Line search on beta around sqrt(eta)*alpha
BETA_REFINE_CONFIG = {
    'rel_step': 0.01,     # coarse scan step relative to beta0
    'shrink': 0.5,        # step factor per refinement round
    'rounds': 5,          # number of refinement rounds
    'window': 0.5,        # search interval is [(1-window)*beta0, (1+window)*beta0]
}

# Truncated Fock space checks
FOCK_CONFIG = {
    'n_max': 40,             # default photon-number truncation
    'confirm_factor': 2,     # confirmation run uses confirm_factor * n_max
}

# Monte Carlo sampler
MC_CONFIG = {
    'n_samples': 1_000_000,
    'seed': 20240607,
    'block_size': 65_536,    # draws per independently seeded block
}

# Verification tolerances
VERIFY_TOLERANCES = {
    'operator_inequality': 1e-6,    # lambda_min(W) >= -tol
    'truncation_shift': 1e-7,       # |lambda_min(n_max) - lambda_min(2 n_max)|
    'theorem1': 1e-8,               # inner-block lambda_min >= -tol
    'mc_sigmas': 5.0,               # agreement in standard errors
}

# Adaptive quadrature
QUADRATURE_CONFIG = {
    'rtol': 1e-12,           # relative to the L1 mass of the integrand
    'nodes': 20,             # Gauss-Legendre nodes per panel
    'panel_width': 0.25,     # initial panel width
    'max_depth': 30,         # bisection depth per panel
    'envelope_floor': 1e-16, # tail cut where |f| drops below this fraction of its peak
}

# Jacobi eigensolver
EIGEN_CONFIG = {
    'rel_tol': 1e-12,        # off-diagonal Frobenius norm relative to matrix norm
    'max_sweeps': 100,
}

# Fidelity bound comparison
LAMBDA_DEFAULT = (1, 0.4120)   # (m, r)

# Default operating points for commands run without explicit parameters
VERIFY_DEFAULTS = {
    'kappa': 5.0,
    'gamma': 0.5,
    'beta': 0.5,
    'x_th': 0.3,
}

MC_DEFAULT_POINT = {
    'eta': 0.8,
    'xi': 0.04,
    'alpha': 0.6,
    'x_th': 0.3,
}

# (start, stop, step)
SWEEP_LOSS_GRID = (0.0, 0.9, 0.1)
FIDELITY_XI_GRID = (0.0, 1.0, 0.01)
