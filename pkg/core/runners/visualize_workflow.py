from langgraph.graph.state import CompiledStateGraph

from core.labs.workflow import ExperimentWorkflow


# noinspection PyUnresolvedReferences
def display_workflow(lab: object) -> None:
    """Writes the lab's graph as a Mermaid diagram next to the working directory."""
    if not isinstance(getattr(lab, 'workflow', None), CompiledStateGraph):
        raise ValueError('Lab must have "workflow" field that is a compiled state graph')

    with open(f'{lab.__class__.__name__}.mmd', 'w', encoding='utf-8') as f:
        f.write(lab.workflow.get_graph().draw_mermaid())


if __name__ == '__main__':
    display_workflow(ExperimentWorkflow())
