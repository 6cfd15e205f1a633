from .datasets import (CLUSTER_MODES, DOMAIN, QUINTILE, DatasetFormatError, DoseEnvironment,
                       HierarchicalDoseDataset, LatencyDataset, LatencyEnvironment,
                       coarse_class, dose_cluster_map, load_dose, load_latency)
from .fixtures import dose_fixture, latency_fixture, write_dose_fixture, write_latency_fixture
from .synthetic import (CLIP, ClassicalEnvironment, ContextualEnvironment,
                        SyntheticClassicalSpec, SyntheticContextualSpec, centroid,
                        clipped_uniform_mean, cluster_seeds, gen_classical, gen_contextual,
                        gen_history_classical, gen_history_contextual)
