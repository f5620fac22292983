from core.labs.mc_engine import MonteCarloEngine
from core.labs.rearrangement import RearrangementLab
from core.runners.setup import DEMO_SAMPLES, DEMO_SEED
from core.tools.catalog import parse_key

if __name__ == '__main__':
    spec = parse_key('linf:n=64')
    emp = MonteCarloEngine().sample_values(spec, DEMO_SAMPLES, DEMO_SEED)

    lab = RearrangementLab()
    curve = lab.rearrange(emp)
    report = lab.check_properties(curve, spec, emp)

    print(report.model_dump_json(indent=2))
