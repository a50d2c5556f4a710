"""Prompt templates. Slots use ``string.Template`` syntax (``$name``)."""

from __future__ import annotations

from string import Template

PAD_TO_TEXT = Template(
    "You are an expert in emotion psychology.\n"
    "A person was rated on the pleasure-arousal-dominance model, each axis on a 1-9 Likert scale: "
    "[pleasure: $pleasure, arousal: $arousal, dominance: $dominance].\n"
    "Describe this person's emotional state in one sentence, using basic emotion words "
    "(for example joy, anger, fear, sadness, surprise, disgust, shame, pride, relief, contentment) where they fit.\n"
    "Description:"
)

BEHAVIOR_SYSTEM = Template(
    '{"role": "system", "content": "You will act as the character $self_name. I will act as $partner_name.\n'
    "Your inner state for this episode: \n$states\n"
    "Situation: \n$background\n"
    "Things you want to bring up: \n$topics\n"
    'Begin the conversation."}'
)

BEHAVIOR_TURN = Template('{"role": "$role", "content": "$content"}')

BEHAVIOR_USER = Template(
    '{"role": "user", "content": "Memories that may matter now: \n$memories\n'
    "Behavior tendencies to keep in mind: \n$persona\n"
    "Reply with END to stop talking, otherwise give your next behavior. "
    'Your reaction:"}'
)

APPROVAL = Template(
    "You are $self_name. Your inner state: \n$states\n"
    "The conversation so far: \n$context\n"
    "Memories that may matter now: \n$memories\n"
    "$partner_name expects you to respond with this behavior: $suggested\n"
    "Would you go along with it? Answer Yes or No first, then give a short reason."
)

EVENT_SUMMARY = Template(
    "You are $self_name. Your inner state: \n$states\n"
    "Behavior tendencies to keep in mind: \n$persona\n"
    "Transcript of the conversation: \n$context\n"
    "List the key events that happened in this conversation."
    "\nOutput a JSON list of objects with keys description, keywords, poignancy, emergency."
)

THOUGHTS = Template(
    "You are $self_name. Your inner state: \n$states\n"
    "Behavior tendencies to keep in mind: \n$persona\n"
    "Events you just went through: \n$events\n"
    "Related things you remember: \n$memories\n"
    "Write down the new thoughts that arise."
    "\nOutput a JSON list of objects with keys description, keywords, poignancy."
)

RELATIONSHIP = Template(
    "You are an expert in social psychology, assessing the character $self_name.\n"
    "Inner state: \n$states\n"
    "Behavior tendencies to keep in mind: \n$persona\n"
    "Recent events and thoughts: \n$events\n"
    "Previous relationship with $partner_name is: $relationship\n"
    "Rate the relationship now on trust, intimacy and supportiveness, each 1-9."
    "\nOutput a JSON object with keys description, intimacy, trust, supportiveness, attitude."
)

MOTIVATION = Template(
    "You are an expert in personality psychology, assessing the character $self_name.\n"
    "Inner state: \n$states\n"
    "Recent events and thoughts: \n$events\n"
    "Update the long-term motivation, short-term motivation and central belief."
    "\nOutput a JSON object with keys long_term_motivation, short_term_motivation, central_belief."
)

EMOTION_UPDATE = Template(
    "You are an expert in emotion psychology, assessing the character $self_name.\n"
    "Inner state: \n$states\n"
    "The conversation so far: \n$context\n"
    "Rate the current emotion on pleasure, arousal and dominance, each on a 1-9 Likert scale."
    "\nOutput a JSON object with keys pleasure, arousal, dominance."
)

TOPICS = Template(
    "You are planning the next scene for the character $self_name.\n"
    "Inner state: \n$states\n"
    "Behavior tendencies to keep in mind: \n$persona\n"
    "Earlier episodes: \n$backgrounds\n"
    "Recent events, including ones supplied from outside the story: \n$events\n"
    "Related things remembered: \n$memories\n"
    "Suggest topics this character would like to raise next."
    "\nOutput a JSON list of objects with keys description, poignancy, emergency."
)

BACKGROUNDS = Template(
    "You are planning the next scene for the character $self_name.\n"
    "Inner state: \n$states\n"
    "Behavior tendencies to keep in mind: \n$persona\n"
    "Earlier episodes and their topics: \n$history\n"
    "Numbered topic candidates: \n$topics\n"
    "The places available are: $places\n"
    "Suggest backgrounds for the next episode."
    "\nOutput a JSON list of objects with keys background, poignancy, emergency, topic ids, and initial setting "
    "(mapping $self_name and $partner_name to emotion, place and motion)."
)

JSON_REFORMAT = Template(
    "Rewrite the text below as valid JSON only, keeping its content.\n"
    "Text: $raw"
)


def bullet(items) -> str:
    items = [str(i) for i in items]
    return ";".join(items) if items else "none"


def numbered(items) -> str:
    return "\n".join(f"{i}. {t}" for i, t in enumerate(items)) if items else "none"
