from typing import List, Optional, Tuple

from pydantic import BaseModel, Field


class TransitionDistribution(BaseModel):
    """Weighted next-step distribution of one node, neighbors in increasing id order"""

    source: int
    neighbors: List[int] = Field(default_factory=list)
    probabilities: List[float] = Field(default_factory=list)

    @property
    def is_dead_end(self) -> bool:
        return not self.neighbors

    def as_dict(self) -> dict:
        return dict(zip(self.neighbors, self.probabilities))


class GraphBuildStats(BaseModel):
    documents: int = 0
    pairs_processed: int = 0
    oov_pairs_skipped: int = 0
    self_loops_skipped: int = 0
    words_added: int = 0

    def merge(self, other: "GraphBuildStats") -> "GraphBuildStats":
        return GraphBuildStats(
            documents=self.documents + other.documents,
            pairs_processed=self.pairs_processed + other.pairs_processed,
            oov_pairs_skipped=self.oov_pairs_skipped + other.oov_pairs_skipped,
            self_loops_skipped=self.self_loops_skipped + other.self_loops_skipped,
            words_added=self.words_added + other.words_added,
        )


class DegreeHistogram(BaseModel):
    """Unweighted degree histogram plus a log-log least-squares tail fit"""

    bins: List[Tuple[int, int]] = Field(default_factory=list)
    floor: Optional[int] = None
    slope: Optional[float] = None
    intercept: Optional[float] = None
    r_squared: Optional[float] = None
    fitted_points: int = 0
