"""Build test fixtures: plans, recorded replays, and expected episodes.

Expected episode records come from the command-line `exec --replay`
path, so the browser replay test checks true wire/CLI equivalence.
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from voidp import (ChainModel, CostModel, Evidence, Mode, ResidualEntropy,
                   RewardSpec, build_plan, posterior_marginal, sample)
from voidp import serialize

out = Path(sys.argv[1])
out.mkdir(parents=True, exist_ok=True)

rng = np.random.default_rng(4242)
domains = [2, 3, 2, 3]
prior = rng.dirichlet(np.ones(domains[0]))
transitions = [rng.dirichlet(np.ones(domains[i + 1]), size=domains[i]) for i in range(3)]
model = ChainModel(prior, transitions)
spec = RewardSpec.homogeneous(ResidualEntropy(), 4)
tables = build_plan(model, spec, CostModel.uniform(4, 2), Mode.SMOOTHING)
serialize.save(tables, out / "plan.json")

for i in range(5):
    world = sample(model, 1000 + i).tolist()
    with open(out / f"replay_{i}.json", "w") as fh:
        json.dump({"assignment": world}, fh)
    subprocess.run(
        [sys.executable, "-m", "voidp.cli", "exec",
         "--plan", str(out / "plan.json"),
         "--replay", str(out / f"replay_{i}.json"),
         "-o", str(out / f"episode_{i}.json")],
        check=True, capture_output=True)
    with open(out / f"episode_{i}.json") as fh:
        episode = json.load(fh)
    evidence = {int(j): int(x) for j, x in episode["queried"]}
    posteriors = [
        posterior_marginal(model, Evidence(evidence, Mode.SMOOTHING), j).probs.tolist()
        for j in range(1, 5)
    ]
    with open(out / f"posteriors_{i}.json", "w") as fh:
        json.dump(posteriors, fh)

flip = [[0.75, 0.25], [0.25, 0.75]]
sym3 = ChainModel([0.5, 0.5], [flip, flip])
entropy3 = RewardSpec.homogeneous(ResidualEntropy(), 3)
serialize.save(build_plan(sym3, entropy3, CostModel.uniform(3, 1), Mode.SMOOTHING),
               out / "sym3_b1.json")
serialize.save(build_plan(sym3, entropy3, CostModel.uniform(3, 0), Mode.SMOOTHING),
               out / "sym3_b0.json")
print("fixtures written to", out)
