"""Prediction with a real-valued covariate: a step link with 10% label noise.

The mixture has to find both a useful context length and a partition fine
enough to split the covariate at 0.5.

    python3 demos/side_information.py
"""

from ergodic_predict import SideInfoPredictor, SideInfoSource, side_info_bayes_loss, side_info_generate
from ergodic_predict.processes import StepLink

source = SideInfoSource(StepLink((0.5,), (0.1, 0.9)))
n = 20_000
x, y = side_info_generate(source, n, seed=1)

predictor = SideInfoPredictor(seed=1, record_experts=False)
mistakes = 0
print(f"R* = {side_info_bayes_loss(source):.2f}")
for t in range(1, n + 1):
    step = predictor.step(x[t - 1])
    mistakes += step.prediction != y[t - 1]
    predictor.reveal(int(y[t - 1]))
    if t in (100, 1_000, 5_000, n):
        print(f"n={t:>6}  loss {mistakes / t:.4f}")

state = predictor.epoch_state()
print(f"epoch {state.m}: {state.grid_size} (order, level) experts, eta {state.eta:.5f}")
