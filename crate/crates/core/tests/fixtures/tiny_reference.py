"""Dense-matrix reference outputs for tiny_model.json on tiny_dataset.json.

Regenerate with: python3 tiny_reference.py > tiny_reference.json
"""
import json

import numpy as np

model = json.load(open("tiny_model.json"))
data = json.load(open("tiny_dataset.json"))

out = {}
for g in data["graphs"]:
    n = g["n"]
    a = np.eye(n)
    for e in g["edges"]:
        w = e[2] if len(e) == 3 else 1.0
        a[e[0], e[1]] = a[e[1], e[0]] = w
    d = a.sum(axis=1)
    a_hat = a / np.sqrt(np.outer(d, d))
    h = np.zeros((n, model["T"]))
    h[np.arange(n), g["node_labels"]] = 1.0
    layers = []
    for w in model["layers"]:
        h = np.maximum(a_hat @ h @ np.array(w).T, 0.0)
        layers.append(h.tolist())
    logits = np.array(model["readout"]["W"]) @ h.mean(axis=0) + np.array(model["readout"]["b"])
    p = np.exp(logits - logits.max())
    p /= p.sum()
    out[g["id"]] = {"embeddings": layers, "probabilities": p.tolist(), "decision": int(p[1] > p[0])}

print(json.dumps(out, indent=1))
