import pytest

from helpers import make_network, make_schema


@pytest.fixture(scope="session")
def tiny_chain():
    """A -> B with P(A=1)=0.6, P(B=1|A=1)=0.5, P(B=1|A=0)=0.2."""
    schema = make_schema([("A", ("0", "1")), ("B", ("0", "1"))])
    return make_network(
        schema,
        [("A", "B")],
        {"A": [[0.4, 0.6]], "B": [[0.8, 0.2], [0.5, 0.5]]},
    )
