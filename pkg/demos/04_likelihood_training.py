"""Train the heteroscedastic likelihood network on a small Morlet problem.

Run:  python demos/04_likelihood_training.py   (about a minute)
"""

import numpy as np

from cvaegprr import (
    LikelihoodNet,
    MlpArchitecture,
    TrainConfig,
    add_noise,
    fit_pod_fixed_k,
    fit_recognition,
    generate_morlet_set,
    project,
    split,
    train,
)
from cvaegprr.liknet import init_net, raw_outputs, softplus

full = generate_morlet_set(300, 120, seed=0)
train_clean, _ = split(full, 150, seed=1)
data = add_noise(train_clean, 0.05, seed=2)

basis = fit_pod_fixed_k(data, 6)
recog = fit_recognition(data.params, project(basis, data), restarts=3, seed=3)

# Inputs: latent sample, physical point, parameters.  Outputs: mean and a raw
# value that softplus maps to a positive variance.
k, m, d = 6, 1, 2
net = init_net(MlpArchitecture(k + m + d, (64, 64, 64), 2), seed=4)
cfg = TrainConfig(lr_stages=((1e-3, 30), (1e-4, 10)), batch_size=1000, seed=5)
result = train(net, data, recog, cfg)

hist = result.history
print("loss history points:", len(hist))
print("first recorded loss:", round(hist[0, 1], 3), "| last:", round(hist[-1, 1], 3))

# The learned observation variance should sit near the injected noise level.
rng = np.random.default_rng(6)
probe = np.hstack([
    np.zeros((500, k)),
    rng.uniform(-1, 1, (500, m)),
    np.column_stack([rng.uniform(2, 50, 500), rng.integers(2, 6, 500)]),
])
out = raw_outputs(net, net.scaler.apply(probe))
sig2 = softplus(out[:, 1]) * net.target_scale**2
print("\ninjected noise variance:", 0.05**2)
print("median learned variance:", float(np.median(sig2)))
