"""Loss of the mixture predictor on an order-2 Markov source as n grows.

    python3 demos/markov_source.py
"""

from ergodic_predict import MarkovSource, bayes_loss, generate, predict_sequence
from ergodic_predict.evaluation import cumulative_loss, expected_loss_exact, markov_loss_bound

source = MarkovSource.from_states(2, {"00": 0.15, "01": 0.7, "10": 0.4, "11": 0.9})
n = 50_000
bits = generate(source, n, seed=3)
ledger = predict_sequence(bits.tolist(), seed=3, estimator="laplace", record_experts=False)

print(f"L* = {bayes_loss(source):.4f}")
print(f"{'n':>7} {'loss':>8} {'expected':>9} {'best order':>11} {'bound gap':>10}")
for t in (100, 1_000, 10_000, n):
    best = ledger.best_expert_mistakes[t - 1] / t
    print(
        f"{t:>7} {cumulative_loss(ledger, 1, t):>8.4f} {expected_loss_exact(ledger, 1, t):>9.4f}"
        f" {best:>11.4f} {markov_loss_bound(2, t):>10.4f}"
    )

# the learning rate and grid size of each epoch
for e in ledger.epochs[-3:]:
    print(f"epoch {e.m}: {e.steps} steps over {e.grid_size} orders, eta {e.eta:.4f}, regret {e.regret:.4f} <= {e.bound:.4f}")
