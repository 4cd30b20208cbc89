"""Prompt templates for generation, teaching, detection, and judging.

Each builder embeds a distinctive first line so deterministic mock backends
can route requests without guessing; real chat backends simply see normal
instructions.
"""

from __future__ import annotations

from .labels import Taxonomy

META_SIGNATURE = "Extract the structured attributes of the document below."
NATIVE_SIGNATURE = "Write an original document from the outline below."
POLISH_SIGNATURE = "Polish the document below."
JUDGE_SIGNATURE = "Return a list of three float scores"
DETECT_SIGNATURE = "A conversation between User and Assistant."

HUMANIZE_LINE = (
    "Imitate natural human writing: vary sentence rhythm, allow small "
    "informalities and imperfections, and avoid formulaic transitions."
)


def meta_extraction_prompt(text: str) -> str:
    return (
        f"{META_SIGNATURE}\n"
        'Respond with a single JSON object with keys "topic" (a short phrase), '
        '"key_points" (a list of short strings), and "style" (one word such as '
        "formal, narrative, or conversational). Output the JSON object and "
        "nothing else.\n\n"
        f"Document:\n{text}"
    )


def native_generation_prompt(
    topic: str,
    key_points: list[str],
    style: str | None,
    target_tokens: int,
    humanize: bool,
) -> str:
    lines = [
        NATIVE_SIGNATURE,
        "Adhere strictly to the stated topic, key points, and writing style.",
        "",
        f"Topic: {topic}",
        f"Key points: {'; '.join(key_points) if key_points else 'none'}",
        f"Style: {style or 'neutral'}",
        f"Target length: {target_tokens} tokens.",
    ]
    if humanize:
        lines.append(HUMANIZE_LINE)
    return "\n".join(lines)


def continuation_prompt(text: str, more_tokens: int) -> str:
    return (
        f"Continue the document below with roughly {more_tokens} more tokens, "
        "keeping the same topic and style. Output only the continuation.\n\n"
        f"Document:\n{text}"
    )


def polish_prompt(text: str) -> str:
    return (
        f"{POLISH_SIGNATURE} Improve fluency and style while strictly "
        "preserving the original semantic intent and logical structure. "
        "Return only the polished document.\n\n"
        f"Document:\n{text}"
    )


def hindsight_prompt(text: str, gold_class: str, taxonomy: Taxonomy) -> str:
    """Teacher prompt: reconstruct the reasoning that leads to a known label.

    Carries seven numbered instructions and ends with an opened ``<think>``
    tag so the teacher completes the rationale in place.
    """
    menu = taxonomy.menu()
    return (
        "You are a forensic writing analyst deciding whether a piece of text "
        "was written by a human or produced or edited by an AI model.\n\n"
        "Below is a passage and a known label telling you which class it "
        f"belongs to ({menu}).\n\n"
        "Your job is to:\n"
        "1. Analyze the text step by step.\n"
        "2. Identify concrete evidence that supports the given label.\n"
        "3. Contrast it with why the other class(es) are less likely.\n"
        "4. Write your reasoning in natural language inside <think> tags.\n"
        f"5. Conclude with the final label (one word: {menu}) in <answer> tags.\n"
        "6. Do not use any other tags or formatting.\n"
        "7. Do not explicitly mention the ground truth label in your "
        "reasoning. Write as if the label were still unknown to you.\n\n"
        "Always ground your analysis in specific stylistic, structural, or "
        "semantic features of the text. Avoid generic summaries.\n\n"
        f"Text: {text}\n"
        f"Ground Truth Label: {gold_class}\n\n"
        "<think>"
    )


def detection_prompt(text: str, taxonomy: Taxonomy) -> str:
    """Think-then-Answer inference prompt."""
    menu = taxonomy.menu()
    return (
        f"{DETECT_SIGNATURE} The Assistant first thinks inside "
        f"<think>...</think> tags and then answers in one word ({menu}) "
        "inside <answer>...</answer> tags.\n\n"
        "Your task: you are given a piece of text that is either human-written "
        "or AI-generated/edited. Determine which. Think step by step: describe "
        "AI artifacts, inconsistencies, or any clues of human authorship, "
        f"summarize your analysis, then answer with {menu}.\n\n"
        f"Text: {text}"
    )


def direct_prompt(text: str, taxonomy: Taxonomy) -> str:
    """No-reasoning variant: the model must answer immediately."""
    menu = taxonomy.menu()
    return (
        f"Answer in one word ({menu}) inside <answer>...</answer> tags, with "
        "no other output.\n\n"
        "Your task: you are given a piece of text that is either human-written "
        "or AI-generated/edited. Determine which.\n\n"
        f"Text: {text}"
    )


_JUDGE_EXAMPLES = """\
Example 1:
Text: the meeting ran long and honestly nobody took notes, classic us
Model Output: <think> informal tone, specific self-deprecating detail, \
no template structure; reads like a quick personal message </think> \
<answer> Human </answer>
Scores: [1.0, 0.9, 0.8]

Example 2:
Text: Furthermore, the comprehensive framework delivers significant value.
Model Output: <think> colloquial phrasing and typos suggest a casual human \
author </think> <answer> AI </answer>
Scores: [0.0, 0.2, 0.3]"""


def judge_prompt(doc_text: str, model_output: str) -> str:
    """Consistency-judge prompt scoring a reasoning trace on three criteria."""
    return (
        "You are an expert evaluator checking whether a detector's final "
        "classification is consistent with its reasoning. The detector's goal "
        "is to decide whether a given text was written by a human or produced "
        "by a language model.\n\n"
        "You will be provided with:\n"
        "- An input text: the passage under evaluation.\n"
        "- The detector output: a reasoning trace inside <think>...</think> "
        "tags followed by the predicted label inside <answer>...</answer> "
        "tags.\n\n"
        f"{JUDGE_SIGNATURE}, each ranging from 0.0 to 1.0, for these "
        "criteria:\n"
        "1. Answer-reasoning alignment: does the reasoning logically support "
        "the final answer? This score is binary (1.0 or 0.0).\n"
        "2. Groundedness: is the reasoning anchored in the input text and "
        "internally coherent?\n"
        "3. Specificity: how specific, informative, and non-generic is the "
        "reasoning?\n\n"
        "Respond strictly with a Python-style list of floats in this format:\n"
        "[alignment, groundedness, specificity]\n"
        "Do not include any explanations, comments, or extra output.\n\n"
        f"{_JUDGE_EXAMPLES}\n\n"
        f"Text: {doc_text}\n"
        f"Model Output: {model_output}"
    )
