"""Build a small model bundle for frontend integration tests."""

import sys

from mdmx import pipeline
from mdmx.config import PipelineConfig


def fast_config():
    cfg = PipelineConfig()
    cfg.seed = 9
    cfg.synth.n_countries = 6
    cfg.synth.n_years = 70
    cfg.data.n_ages = 60
    cfg.data.flat_age_pair = (55, 59)
    cfg.cluster.k_min = 2
    cfg.cluster.k_max = 4
    cfg.trajectory.nn_epochs = 30
    cfg.disruption.core_epochs = 400
    cfg.disruption.sg_window = 9
    cfg.svdcomp.epochs = 40
    return cfg


def main(workdir):
    cfg = fast_config()
    pipeline.run_synth(cfg, workdir)
    pipeline.run_ingest(cfg, workdir)
    pipeline.run_pool(cfg, workdir)
    pipeline.run_tensor(cfg, workdir)
    pipeline.run_decompose(cfg, workdir)
    pipeline.run_cluster(cfg, workdir)
    pipeline.run_trajectory(cfg, workdir)
    pipeline.run_disruption(cfg, workdir)
    pipeline.run_train_indicators(cfg, workdir)
    print(f"bundle ready at {workdir}")


if __name__ == "__main__":
    main(sys.argv[1])
