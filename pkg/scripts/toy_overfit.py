"""Overfit the keyword toy: a sanity run for the full training loop.

Twenty sentences, one marker word deciding the class. A small two-layer
model should reach 100% training accuracy well inside 200 epochs; if it
does not, something in the loss, gradients, or optimizer is off.
"""

import argparse
import time

from cn3.model import Cn3Model, ModelConfig
from cn3.synthetic import keyword_classification
from cn3.training import TrainConfig, evaluate, train


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--layers", type=int, default=2)
    ap.add_argument("--d", type=int, default=16, help="d_word, d_h and d_a")
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = keyword_classification(n=args.n, seed=args.seed)
    cfg = ModelConfig(task="classify", layers=args.layers, d_word=args.d,
                      d_h=args.d, d_a=args.d, seed=args.seed)
    model = Cn3Model(cfg, data)
    tcfg = TrainConfig(epochs=args.epochs, batch_size=4, seed=args.seed)

    start = time.perf_counter()
    history = train(model, data, tcfg)
    elapsed = time.perf_counter() - start

    for row in history[:: max(1, len(history) // 10)]:
        print(f"epoch {row['epoch']:4d}  train_loss {row['train_loss']:.4f}")
    acc = evaluate(model, data, "accuracy")
    print(f"train accuracy {acc:.3f} after {len(history)} epochs "
          f"({elapsed:.1f}s)")


if __name__ == "__main__":
    main()
