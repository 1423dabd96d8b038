import numpy as np

from chancenet import model


def random_instance(rng, n_internal, regime):
    n = n_internal + 2
    src, snk = 0, n - 1
    arcs = []
    perm = list(rng.permutation(np.arange(1, n - 1))) + [snk]
    prev = src
    for nxt in perm:
        arcs.append((prev, int(nxt)))
        prev = int(nxt)
    for i in range(n - 1):
        for j in range(i + 1, n):
            if (i, j) in arcs or (i, j) == (src, snk):
                continue
            if rng.random() < 1.0 / np.sqrt(n):
                arcs.append((i, j))
    m = len(arcs)
    mu = rng.uniform(5.0, 100.0, size=m)
    if regime == "diag":
        sig = rng.uniform(0.5, 0.4 * mu)
        cov = np.diag(sig**2)
    else:
        q, _ = np.linalg.qr(rng.normal(size=(m, m)))
        lam = rng.uniform(1.0, 3.0, size=m)
        cov = q @ np.diag(lam) @ q.T
        scale = rng.uniform(1.0, 12.0, size=m)
        cov = cov * np.outer(scale, scale)
        cov = 0.5 * (cov + cov.T)
    rows = [
        model.Arc(int(t), int(h), float(rng.uniform(1, 100)), float(mu[k]))
        for k, (t, h) in enumerate(arcs)
    ]
    return model.NetworkInstance(
        nodes=n, source=src, sink=snk, demand=float(rng.uniform(20, 160)),
        arcs=rows, cov=cov,
    )
