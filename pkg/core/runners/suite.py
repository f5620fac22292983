from core.labs.inequalities.suite import InequalitySuite
from core.runners.setup import DEMO_SAMPLES, DEMO_SEED
from core.tools.catalog import parse_key

if __name__ == '__main__':
    suite = InequalitySuite()
    for key in ('linear:n=2', 'monomial:k=1'):
        verdicts = suite.run(parse_key(key), ['upper_gaussian', 'small_deviation', 'skewness', 'kwapien'],
                             DEMO_SAMPLES, DEMO_SEED)
        for verdict in verdicts:
            print(verdict.summary())
