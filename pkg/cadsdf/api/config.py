# network
LAYER_SIZES = [3, 256, 256, 256, 256, 1]
OMEGA0 = 30.0
INPUT_SCALE = 2.0

# loss weights
LAMBDA_E = 50.0
LAMBDA_DM = 7000.0
LAMBDA_DNM = 600.0
LAMBDA_GAUSS = 10.0
ALPHA = 100.0
DT_A = 0.25
REGULARIZER = 'gauss_dt'
REGULARIZERS = ('gauss_dt', 'gauss_plain', 'dirichlet_energy', 'hessian_l2', 'hessian_l1', 'none')

# training
ITERATIONS = 10000
LEARNING_RATE = 5e-5
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
BATCH_MANIFOLD = 10000
BATCH_UNIFORM = 15000
BATCH_OMEGA = 15000
# second-order jets held in memory at once
CURVATURE_CHUNK = 2048
KNN_K = 50
ANNEALING_MODE = 'paper'
ANNEALING_MODES = ('paper', 'constant', 'off')
TAU_PLATEAU_END = 0.2
TAU_RAMP_END = 0.5
TAU_FLOOR = 1e-4
DYNAMIC_SAMPLING = True
SEED = 0
DETERMINISTIC = False
CHECKPOINT_EVERY = 1000
LOG_EVERY = 100

# guards
GRADIENT_EPS = 1e-8

# meshing
GRID_RESOLUTION = 256
GRID_BOUND = 0.55
MIN_RESOLUTION = 32
MAX_RESOLUTION = 1024
GRID_CHUNK = 65536

# metrics
METRIC_SAMPLES = 100000
F1_THRESHOLD = 5e-3

# point clouds
CLOUD_BOUND = 0.6

# fixtures
FIXTURE_KINDS = ('sphere', 'cube', 'cylinder', 'box_minus_cylinder', 'fandisk_like_wedge')
SPHERE_RADIUS = 0.4
CUBE_HALF = 0.4
CYLINDER_RADIUS = 0.3
CYLINDER_HALF_HEIGHT = 0.4
HOLE_RADIUS = 0.2
CURVED_EDGE_SEGMENTS = 256

CHECKPOINT_MAGIC = 'CADSDF-CHECKPOINT'
CHECKPOINT_VERSION = 1
