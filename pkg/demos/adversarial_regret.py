"""The regret guarantee holds for every sequence, including ones built to hurt.

The sequence below is chosen step by step to disagree with the more likely
prediction of the mixture, so its loss stays above 1/2; the bound still
holds because the best order is just as bad.

    python3 demos/adversarial_regret.py
"""

from ergodic_predict import UniversalPredictor
from ergodic_predict.evaluation import report_from_ledger

predictor = UniversalPredictor(seed=0)
for _ in range(4096):
    step = predictor.step()
    predictor.reveal(0 if step.threshold > 0.5 else 1)

report = report_from_ledger(predictor.ledger)
print(f"expected loss   {report.expected_loss:.4f}")
print(f"best order loss {report.best_expert_loss:.4f}")
print(f"regret {report.regret:.4f} <= bound {report.bound:.4f}")
print("per-epoch slack:", [round(s, 4) for s in report.epoch_slacks])
