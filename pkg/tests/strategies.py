"""Hypothesis strategies for random valid stratified populations."""

from hypothesis import strategies as st

from stratexp.stats import StratumSummary, summarize_population


@st.composite
def strata(draw, stratum_id):
    N_h = draw(st.integers(min_value=3, max_value=500))
    n_h = draw(st.integers(min_value=1, max_value=N_h - 1))
    mean_x = draw(st.floats(min_value=1.0, max_value=1e4))
    sd_x = draw(st.floats(min_value=0.1, max_value=1e3))
    return StratumSummary.from_moments(
        stratum_id, N_h, n_h,
        mean_x=mean_x,
        mean_y=draw(st.floats(min_value=1.0, max_value=1e4)),
        sd_x=sd_x,
        sd_y=draw(st.floats(min_value=0.1, max_value=1e3)),
        rho=draw(st.floats(min_value=-0.99, max_value=0.99)),
        cx=sd_x / mean_x,
        beta2x=draw(st.floats(min_value=1.5, max_value=50.0)),
    )


@st.composite
def populations(draw, max_strata=6):
    count = draw(st.integers(min_value=1, max_value=max_strata))
    return summarize_population([draw(strata(str(h + 1))) for h in range(count)])
