#pragma once

// A ring experiment small enough to train in well under a second.
inline constexpr const char* kTinyExperiment = R"({
  "schema": "danlab/experiment@1",
  "name": "tiny",
  "train": {"iterations": 30, "batch_size": 16, "xi": "S", "lambda1": 0.0, "lambda2": 1.0,
            "lr": 0.001, "beta1": 0.5, "seed": 7, "snapshot_every": 10},
  "data": {"ring": {"k": 8, "radius": 2.0, "variance": 0.01}},
  "noise": {"dim": 4},
  "networks": {"generator": [4, 16, 2], "discriminator": [2, 8, 1], "encoder": [2, 8], "head": [8, 1]},
  "eval": {"n_samples": 500, "mmd_samples": 200}
})";
