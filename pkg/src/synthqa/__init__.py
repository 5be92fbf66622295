"""synthqa: turn unstructured technical text into a reviewed synthetic
question-answer dataset.

Pipeline: structural chunking -> LLM summarization and QnA generation ->
embedding-based quality metrics (cosine relevance, lexical entropy, K-Means
clusters, 2D projection) -> human-in-the-loop review console -> curated
export.
"""

__version__ = "0.1.0"
