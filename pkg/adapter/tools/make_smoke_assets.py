"""Build the bundled smoke assets: five sample scenes with annotation boxes
and a trained SmokeVGG checkpoint.

Run from adapter/:  python tools/make_smoke_assets.py
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from camcap_adapter.models import SmokeVGG
from camcap_adapter.scenes import CLASS_NAMES, make_dataset, make_scene

SAMPLES_DIR = Path(__file__).resolve().parent.parent / "src" / "camcap_adapter" / "samples"
TRAIN_SEED = 100
SAMPLE_SEED = 2000
EPOCHS = 12


def train_smoke_model() -> SmokeVGG:
    torch.manual_seed(0)
    scenes = make_dataset(480, seed=TRAIN_SEED)
    images = torch.from_numpy(np.stack([s.image for s in scenes]))
    labels = torch.tensor([s.label for s in scenes])

    model = SmokeVGG()
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=2e-3)
    loss_fn = torch.nn.CrossEntropyLoss()
    generator = torch.Generator().manual_seed(1)
    for epoch in range(EPOCHS):
        order = torch.randperm(len(scenes), generator=generator)
        total = 0.0
        for start in range(0, len(scenes), 32):
            batch = order[start : start + 32]
            optimizer.zero_grad()
            loss = loss_fn(model(images[batch]), labels[batch])
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(batch)
        with torch.no_grad():
            model.eval()
            acc = float((model(images).argmax(1) == labels).float().mean())
            model.train()
        print(f"epoch {epoch}: loss {total / len(scenes):.4f} acc {acc:.3f}")
    model.eval()
    return model


def write_samples() -> None:
    SAMPLES_DIR.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SAMPLE_SEED)
    entries = []
    for i in range(5):
        scene = make_scene(rng, label=i % len(CLASS_NAMES))
        pixels = (scene.image.transpose(1, 2, 0) * 255).round().astype(np.uint8)
        name = f"scene_{i}.png"
        Image.fromarray(pixels).save(SAMPLES_DIR / name)
        entries.append(
            {"file": name, "class_index": scene.label, "box": list(scene.box)}
        )
    (SAMPLES_DIR / "boxes.json").write_text(json.dumps(entries, indent=2), "utf-8")
    print(f"wrote 5 scenes + boxes.json to {SAMPLES_DIR}")


def main() -> None:
    write_samples()
    model = train_smoke_model()
    torch.save(model.state_dict(), SAMPLES_DIR / "smoke_model.pt")
    print(f"wrote {SAMPLES_DIR / 'smoke_model.pt'}")


if __name__ == "__main__":
    main()
