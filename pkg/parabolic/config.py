# Sampling
GAUSS_H_SCALE = 1.5  # std of the horizontal Gaussian proposal
GAUSS_T_SCALE = 2.0  # std of the vertical Gaussian proposal
KP_RADIAL_SCALE = 1.2  # std of the radial Gaussian on the KP cone
QUAD_H_EXTENT = 4.5  # half-width of deterministic lattices, horizontal; e^{-s a^4} < 1e-170 at s=1
QUAD_T_EXTENT = 7.0  # half-width of deterministic lattices, vertical

# Transport LP
KNN_K = 16  # nearest neighbours per node in the 1-Lipschitz constraint graph
MAX_LP_GRID = 2000  # max LP nodes
FLAT_PLANE_POINTS = 512  # Sobol points discretizing a candidate flat measure
FLAT_COARSE_DIRECTIONS = 12  # coarse normal grid in flat_distance
FLAT_REFINE_STEPS = 6
FLAT_SCALE_BRACKET = 4.0  # lambda searched in [lambda0/4, 4*lambda0]

# beta numbers
BETA_GRID_PER_ORTHANT = 64  # Fibonacci grid has 2**n * this points
BETA_REFINE_STEPS = 20
BBETA_PLANE_POINTS = 1000
BBETA_ATOM_WINDOW = 3.0  # atoms within this multiple of r are searched for nearest distance

# dyadic cubes
PRUNE_FRACTION = 1 / 8  # cubes under this fraction of the generation median mass are pruned
MIN_CUBE_ATOMS = 8

# WCD / square function
WCD_SAMPLES = 64
SQUARE_FUNCTION_NODES_PER_DECADE = 32
MIN_RESOLUTION_ATOMS = 200  # atoms required in the smallest square-function ball

# Quadric area
QUAD_THETA_NODES = 128  # Gauss-Legendre nodes in theta
QUAD_RHO_NODES = 32  # Gauss-Legendre nodes in rho up to the exact root
QUAD_V_NODES_3D = 64  # uniform angular nodes on S^1 for n=3
QUAD_V_SAMPLES = 512  # Monte-Carlo directions on S^{n-2} for n>=4
ROOT_RTOL = 1e-12
MONOTONE_CHECK_POINTS = 64
MIN_FIT_RADII = 5
MIN_FIT_OCTAVES = 2.0
MAX_FIT_CONDITION = 1e12
ZETA_FLOOR = 1e-4  # |zeta_hat| below this fraction of c_hat counts as zero

# Hoelder profiles
HOLDER_SAFETY = 0.95  # certified constant target
HOLDER_BASE_LAGS = 128
HOLDER_MAX_POINTS = 2_000_000

# Budgets
DEFAULT_SAMPLES = 100_000
DEFAULT_BUDGET = 5_000_000  # max total particle draws per experiment
