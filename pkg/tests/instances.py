"""Random small allocation instances shared by the optimizer tests."""

import numpy as np

from qnetsim.channels import NoiseParams
from qnetsim.control import ControllerConfig, Request
from qnetsim.link_layer import LinkParams
from qnetsim.memory import MemoryParams
from qnetsim.qnum import UtilitySpec
from qnetsim.topology import Topology


def random_instance(seed: int):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    names = [f"v{i}" for i in range(n)]
    topo = Topology()
    for name in names:
        topo.add_node(name, MemoryParams(t2_s=float(rng.choice([0.05, 0.5, 5.0])), num_modes=int(rng.integers(2, 6))),
                      NoiseParams(p_swap=float(rng.choice([0.5, 0.9, 1.0]))))
    edges = {(names[int(rng.integers(0, i))], names[i]) for i in range(1, n)}
    for _ in range(int(rng.integers(0, 3))):
        a, b = rng.choice(n, 2, replace=False)
        edges.add(tuple(sorted((names[a], names[b]))))
    for a, b in sorted(edges):
        if topo.graph.has_edge(a, b):
            continue
        topo.add_link(a, b, LinkParams(float(rng.uniform(1, 30)), attempt_rate_hz=float(rng.choice([1e4, 1e5])),
                                       f0_link=float(rng.uniform(0.9, 0.995)),
                                       extra_efficiency=float(rng.uniform(0.2, 1.0))))
    reqs = []
    for j in range(int(rng.integers(1, 4))):
        s, d = rng.choice(n, 2, replace=False)
        app = str(rng.choice(["QKD", "DQC", "DQS"]))
        th = {"QKD": 0.85, "DQC": float(rng.choice([0.8, 0.9])), "DQS": 0.85}[app]
        reqs.append(Request(f"r{j}", app, names[s], names[d], UtilitySpec(app, th, steepness=10.0),
                            float(rng.choice([1.0, 2.0])), j))
    cfg = ControllerConfig(k_paths=2, max_depth=1, mc_trials=2000, share_step=0.1)
    return topo, reqs, cfg
