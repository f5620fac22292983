from core.labs.dvoretzky import DvoretzkyLab
from core.runners.setup import DEMO_SEED
from core.tools.catalog import parse_key

if __name__ == '__main__':
    lab = DvoretzkyLab(trials=40, directions=1000, polish=False)
    report = lab.tilted_instability_experiment(parse_key('linf:n=128'), DEMO_SEED, t=4.0, count=50_000)

    print(report.model_dump_json(indent=2))
