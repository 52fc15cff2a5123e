#!/usr/bin/env python3
"""Regenerates fixtures/demo: a synthetic annotation corpus on a cognitive
load reading, gold codings, and a stub script that answers every request the
default configuration makes (stage 1 for model-a, stage 2, stage 3 for four
models under the p3 scheme)."""

import hashlib
import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "fixtures" / "demo"
READING_ID = "clt-reading"
DOC = "clt-reading"
MODELS = ["model-a", "model-b", "model-c", "model-d"]

READING = """# Cognitive Load in Instructional Design

Working memory can hold only a handful of new elements at once and loses them within seconds unless they are rehearsed. Long-term memory, by contrast, stores organised schemas that can be retrieved as single units. Instruction works when it respects the first limit and builds the second store.

Intrinsic load comes from the material itself: how many elements must be processed together to understand it. Element interactivity is high in algebra word problems and low in vocabulary lists. Intrinsic load can only be changed by changing what is learned or what the learner already knows.

Extraneous load comes from the way material is presented. Split attention between a diagram and distant labels, redundant narration of on-screen text, and unguided search all consume working memory without contributing to learning.

Germane processing is the effort devoted to building and automating schemas. Designers cannot add working memory, but they can free it from extraneous demands so that more of it goes into schema construction.

Studying worked examples is often more effective for novices than solving the equivalent problems. A worked example removes the means-ends search that problem solving requires and shows the solution steps directly.

The advantage reverses as expertise grows. Guidance that helps novices becomes redundant for learners who already hold the relevant schemas, and processing it adds extraneous load. Instruction therefore has to fade support as learners advance.
"""

SUMMARY = """The reading explains why instruction should be designed around the limits of working memory. It separates intrinsic load, set by element interactivity, from extraneous load, caused by presentation choices such as split attention and redundancy, and describes germane processing as the effort that builds schemas. It presents the worked example effect for novices and the expertise reversal effect, which calls for fading guidance as learners gain knowledge."""

PROMPTS = [
    "Where have you experienced split attention or redundancy in your own courses?",
    "Is all difficulty during learning a problem, or can some struggle be productive?",
    "How should a teacher decide when to remove worked examples?",
]

NODES = {
    "WM": ("Limits of working memory",
           "Working memory holds few new elements for a short time, while long-term memory stores schemas retrieved as units."),
    "IL": ("Intrinsic load and element interactivity",
           "Load set by how many interacting elements the material requires; it changes only with the content or prior knowledge."),
    "EL": ("Extraneous load from presentation",
           "Split attention, redundancy and unguided search use working memory without contributing to learning."),
    "GL": ("Germane processing and schema construction",
           "Effort spent building and automating schemas, made possible when extraneous demands are removed."),
    "WE": ("Worked example effect",
           "Novices learn more from studying worked solutions than from solving equivalent problems by search."),
    "ER": ("Expertise reversal and fading guidance",
           "Guidance that helps novices becomes redundant for experts, so support should fade as knowledge grows."),
}

D, I, A, G, F = "descriptive", "interpretive", "analytical", "generative", "filtered"
BT, PB = "build_toward", "push_back"

LONG_STATEMENT = (
    "Timed online quizzes that show a countdown clock, flashing progress bars, and a chat sidebar at the same time "
    "split attention so much that students report forgetting the question while scanning the screen, which suggests "
    "that the assessment platform itself adds extraneous load that has nothing to do with the mathematics being "
    "tested and may lower scores for anxious students who already struggle with the content under time pressure"
)

# id, parent, author, body, quoted passage, gold, model label (None = model filters it),
# statement, node, stance, function
ITEMS = [
    ("a01", None, "Maya Lin", "So working memory is basically tiny, like four things max? That explains why I forget phone numbers halfway through dialing.",
     "Working memory can hold only a handful of new elements at once", D, D,
     "Working memory holds only about four new elements, which explains forgetting a phone number mid-dial.", "WM", BT, "ground"),
    ("a02", None, "Jonah Reyes", "I think the point is that schemas let experts cheat the limit: a chess master sees one pattern where I see twelve pieces.",
     "stores organised schemas that can be retrieved as single units", I, I,
     "Schemas let experts treat many elements as one chunk, as a chess master sees a pattern instead of separate pieces.", "WM", BT, "explain_elaborate"),
    ("a03", "a02", "Priya Nair", "I agree!", "", F, None, None, None, None, None),
    ("a04", None, "Sam Okafor", "Algebra word problems were always the worst for me. You have to hold the story, the variables and the equation in your head together.",
     "Element interactivity is high in algebra word problems", D, D,
     "Algebra word problems are hard because the story, the variables and the equation must be held in mind together.", "IL", BT, "ground"),
    ("a05", None, "Lea Fischer", "If intrinsic load can only change with prior knowledge, then pre-teaching vocabulary before a hard text should lower it. Has anyone tested that?",
     "Intrinsic load can only be changed by changing what is learned or what the learner already knows", G, G,
     "Pre-teaching vocabulary before a difficult text could lower intrinsic load by raising prior knowledge.", "IL", BT, "new_idea"),
    ("a06", None, "Carlos Mendes", "I'm not convinced intrinsic load is fixed by the material. The same problem feels easy or hard depending on how tired I am.",
     "Intrinsic load comes from the material itself", A, A,
     "Intrinsic load may not be a fixed property of material, since the same problem feels different depending on fatigue.", "IL", PB, "question"),
    ("a07", "a06", "Maya Lin", "Same here", "", F, None, None, None, None, None),
    ("a08", None, "Aisha Bello", "Our stats textbook puts the graph on one page and the explanation on the next. Constant flipping. Classic split attention.",
     "Split attention between a diagram and distant labels", D, D,
     "A statistics textbook that separates graphs from their explanations forces constant page flipping, an example of split attention.", "EL", BT, "ground"),
    ("a09", None, "Tom Becker", "Narrating exactly the text on the slide feels like it should help, but the reading says it hurts because you process the same thing twice.",
     "redundant narration of on-screen text", I, I,
     "Reading slide text aloud seems helpful but creates redundancy because learners process the same words twice.", "EL", BT, "explain_elaborate"),
    ("a10", None, "Nina Petrova", "Would captions on lecture videos count as redundancy too? For non-native speakers they seem essential.",
     "redundant narration of on-screen text", A, G,
     "Captions may not be redundant for non-native speakers, which questions whether redundancy harms every learner.", "EL", PB, "question"),
    ("a11", "a10", "Jonah Reyes", "Good question, I was wondering the same thing about captions and subtitles.", "", F, None, None, None, None, None),
    ("a12", None, "Grace Kim", "Unguided discovery labs in my physics class were mostly me guessing. Now I see why I learned so little from them.",
     "unguided search all consume working memory", D, I,
     "Unguided physics discovery labs led to guessing and little learning, consistent with search consuming working memory.", "EL", BT, "ground"),
    ("a13", None, "Omar Haddad", "Germane load sounds like the good kind of effort. So the goal isn't zero load, it's redirecting load.",
     "Germane processing is the effort devoted to building and automating schemas", I, I,
     "The aim of design is not zero cognitive load but redirecting effort toward schema building.", "GL", BT, "explain_elaborate"),
    ("a14", None, "Sofia Rossi", "This contradicts desirable difficulties. Bjork argues that some struggle improves retention, so removing load could backfire.",
     "free it from extraneous demands", A, A,
     "Removing load may backfire because desirable difficulties research shows some struggle improves retention.", "GL", PB, "new_idea"),
    ("a15", "a14", "Omar Haddad", "Maybe the difference is whether the struggle is relevant to the schema. Retrieval practice is hard but it is the schema work itself.",
     "", A, A,
     "Struggle helps when it is part of schema work, as in retrieval practice, and hurts when it is irrelevant to the schema.", "GL", BT, "explain_elaborate"),
    ("a16", None, "Ethan Wu", "I could design a checklist for teachers: for each slide, ask whether every element helps build the target schema.",
     "so that more of it goes into schema construction", G, G,
     "A slide checklist could ask whether each element contributes to the target schema.", "GL", BT, "new_idea"),
    ("a17", None, "Hannah Cole", "Worked examples were how I finally got recursion. Seeing the full trace of factorial(4) made it click.",
     "Studying worked examples is often more effective for novices", D, D,
     "A full worked trace of factorial(4) made recursion understandable for a novice.", "WE", BT, "ground"),
    ("a18", None, "Diego Alvarez", "The point about means-ends search is key: when you don't know the steps, you spend all your memory looking for them.",
     "A worked example removes the means-ends search", I, I,
     "Means-ends search uses up working memory when the solution steps are unknown, which worked examples avoid.", "WE", BT, "explain_elaborate"),
    ("a19", None, "Lucy Grant", "But if students only read examples, won't they just copy the pattern without understanding? I see this in my tutoring.",
     "shows the solution steps directly", A, A,
     "Students who only study worked examples may copy patterns without understanding them.", "WE", PB, "question"),
    ("a20", "a19", "Diego Alvarez", "Yeah", "", F, None, None, None, None, None),
    ("a21", None, "Ravi Patel", "What about interleaving examples with practice problems? Example, problem, example, problem.",
     "more effective for novices than solving the equivalent problems", G, G,
     "Alternating worked examples with practice problems could combine the benefits of both.", "WE", BT, "new_idea"),
    ("a22", None, "Emma Novak", "The expertise reversal effect matches my experience. In senior year the step-by-step handouts just slowed me down.",
     "The advantage reverses as expertise grows", D, D,
     "Step-by-step handouts slowed down an advanced student, an instance of expertise reversal.", "ER", BT, "ground"),
    ("a23", None, "Felix Braun", "So guidance itself becomes extraneous load for experts. The same material can be helpful or harmful depending on who reads it.",
     "processing it adds extraneous load", I, A,
     "Guidance turns into extraneous load for experts, so the same material helps or harms depending on the reader.", "ER", BT, "explain_elaborate"),
    ("a24", None, "Zoe Martin", "How would a teacher know when to fade support in a class of thirty with different levels?",
     "Instruction therefore has to fade support as learners advance", A, A,
     "It is unclear how a teacher can fade support appropriately in a large class with mixed levels.", "ER", PB, "question"),
    ("a25", "a24", "Ethan Wu", "Adaptive software could track performance and remove hints automatically once accuracy is high.",
     "", G, G,
     "Adaptive software could fade hints automatically once a student's accuracy is high.", "ER", BT, "new_idea"),
    ("a26", None, "Ivy Chen", "lol this is literally my life", "", F, None, None, None, None, None),
    ("a27", None, "Ben Adler", "Great point", "", F, None, None, None, None, None),
    ("a28", None, "Mila Santos", "The four-element limit seems too neat. Other estimates say seven. Does the exact number matter for design?",
     "only a handful of new elements", A, A,
     "The exact capacity of working memory is contested, and it is unclear whether the number matters for design.", "WM", PB, "question"),
    ("a29", None, "Leo Park", "I think this is why cramming fails: nothing gets into long-term memory as a schema, it just sits in working memory until the exam.",
     "Long-term memory, by contrast, stores organised schemas", I, I,
     "Cramming fails because material never becomes a schema in long-term memory.", "WM", BT, "explain_elaborate"),
    ("a30", None, "Ada Moreau", "Honestly the whole theory reminds me of how my grandmother taught knitting, one stitch at a time, and she never read any research.",
     "", D, "invalid", None, None, None, None),
    ("a31", None, "Kai Yamamoto", "Element interactivity could explain why learning a second language's grammar is harder than its vocabulary.",
     "low in vocabulary lists", I, I,
     "Grammar is harder to learn than vocabulary because grammar rules have high element interactivity.", "IL", BT, "explain_elaborate"),
    ("a32", None, "Rosa Lima", "Dual coding with diagrams placed right next to the labels would fix the textbook problem mentioned above.",
     "distant labels", G, G,
     "Placing labels directly on diagrams would remove split attention in textbooks.", "EL", BT, "new_idea"),
    ("a33", None, "Noah Fisher", "I disagree that extraneous load is always bad. Some messy real-world context makes problems more motivating.",
     "consume working memory without contributing to learning", A, A,
     "Realistic context may count as extraneous load yet still help learning by making problems more motivating.", "EL", PB, "new_idea"),
    ("a34", None, "Julia Weber", "The online quiz platform we use is a perfect example.", "", D, D,
     LONG_STATEMENT, "EL", BT, "ground"),
    ("a35", None, "Marco Silva", "Thanks for sharing", "", F, None, None, None, None, None),
    ("a36", None, "Elena Popescu", "Worked examples in chemistry stoichiometry helped the whole class. Our average went up after the teacher switched.",
     "Studying worked examples is often more effective", D, D,
     "A class's stoichiometry results improved after the teacher switched to worked examples.", "WE", BT, "ground"),
    ("a37", None, "Hugo Laurent", "Faded examples, where steps are removed one by one, seem like a bridge between worked examples and problems.",
     "fade support as learners advance", G, G,
     "Faded worked examples that remove steps gradually could bridge examples and independent problem solving.", "ER", BT, "new_idea"),
    ("a38", "a37", "Lucy Grant", "Interesting", "", F, None, None, None, None, None),
    ("a39", None, "Sara Ahmed", "Does the theory say anything about motivation? A bored student might have plenty of free working memory and still learn nothing.",
     "", A, A,
     "The theory may ignore motivation, since a bored student with spare working memory can still fail to learn.", "GL", PB, "question"),
    ("a40", None, "Paul Dubois", "Maybe the germane load idea means teachers should ask students to explain examples to themselves.",
     "building and automating schemas", G, I,
     "Asking students to self-explain worked examples could direct effort into schema building.", "GL", BT, "new_idea"),
    ("a41", None, "Tara Singh", "I agree with this, it makes sense.", "", F, D,
     "The explanation of cognitive load makes sense.", "WM", BT, "ground"),
    ("a42", None, "Yusuf Kaya", "When I tutor, I notice that students who already know the formulas get annoyed at my long explanations.",
     "Guidance that helps novices becomes redundant", D, None, None, None, None, None),
]

ALT_FUNCTION = {"ground": "explain_elaborate", "explain_elaborate": "ground", "new_idea": "question", "question": "new_idea"}
ALT_NODE = {"WM": "IL", "IL": "WM", "EL": "GL", "GL": "EL", "WE": "ER", "ER": "WE"}


def stable_id(prefix, a, b):
    return prefix + hashlib.sha256((a + "\x1f" + b).encode()).hexdigest()[:16]


def node_id(key):
    return stable_id("sn-", READING_ID, NODES[key][0])


def stage1_payload(item):
    _, _, _, _, _, gold, pred, statement, *_ = item
    if pred is None:
        return {"substantive": False, "statement": "", "label": None,
                "reason": "Expresses agreement or reaction without new content."}
    return {"substantive": True, "statement": statement, "label": pred,
            "reason": "Carries an idea about the reading."}


def link(key, stance, function, why):
    return {"target": node_id(key), "stance": stance, "function": function, "rationale": why}


def stage3_reply(model, k, item):
    """Deterministic per-model variation around the reference link."""
    key, stance, function = item[8], item[9], item[10]
    base = link(key, stance, function, "Closest concept in the reading.")
    if model == "model-a":
        links = [base]
        if k % 6 == 0:
            links.append(link(ALT_NODE[key], BT, "explain_elaborate", "Also touches this concept."))
        body = json.dumps({"links": links})
        return f"```json\n{body}\n```" if k % 5 == 0 else body
    if model == "model-b":
        f = ALT_FUNCTION[function] if k % 3 == 1 else function
        return "Here is my answer: " + json.dumps({"links": [link(key, stance, f, "Matches the node.")]})
    if model == "model-c":
        if k % 7 == 3:
            return json.dumps({"links": [{"target": "uncategorized", "rationale": "No confident match."}]})
        target = ALT_NODE[key] if k % 4 == 2 else key
        return json.dumps({"links": [link(target, stance, function, "Related node.")]})
    # model-d
    if k % 11 == 4:
        return "I am not sure how to categorise this idea."
    s = (PB if stance == BT else BT) if k % 5 == 0 else stance
    return json.dumps({"target": node_id(key), "stance": s, "function": function, "rationale": "Single link."})


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / f"{READING_ID}.md").write_text(READING)
    (OUT / f"{READING_ID}.summary.txt").write_text(SUMMARY + "\n")
    (OUT / f"{READING_ID}.prompts.txt").write_text("\n".join(PROMPTS) + "\n")

    annotations = []
    for n, item in enumerate(ITEMS):
        aid, parent, author, body, quote = item[:5]
        annotations.append({
            "id": aid, "author": author, "body": body, "quoted_passage": quote,
            "parent_id": parent, "document_id": DOC,
            "created_at": f"2025-02-{3 + n // 10:02d}T{9 + n % 10:02d}:{(7 * n) % 60:02d}:00Z",
        })
    (OUT / "annotations.json").write_text(json.dumps({"annotations": annotations}, indent=2) + "\n")

    gold = "annotation_id,label\r\n" + "".join(f"{i[0]},{i[5]}\r\n" for i in ITEMS)
    (OUT / "gold.csv").write_text(gold, newline="")

    rules = []
    # Stage 1. a17 needs the corrective re-prompt; a30 never yields a payload.
    for item in ITEMS:
        marker = f"Annotation id: {item[0]}\n"
        if item[0] == "a17":
            rules.append({"contains": [marker, "Your previous reply could not be used"],
                          "response": json.dumps(stage1_payload(item))})
            rules.append({"contains": [marker], "response": "{\"substantive\": true, \"statement\": "})
            continue
        if item[6] == "invalid":
            rules.append({"contains": [marker], "response": "This annotation is about knitting."})
            continue
        reply = json.dumps(stage1_payload(item))
        if int(item[0][1:]) % 4 == 0:
            reply = "Sure! Here is the analysis.\n```json\n" + reply + "\n```\nLet me know if you need more."
        rules.append({"contains": [marker], "response": reply})

    # Stage 2.
    nodes = [{"title": t, "description": d} for t, d in NODES.values()]
    rules.append({"contains": ["You will identify Synthesis Nodes"], "response": json.dumps({"nodes": nodes})})

    # Stage 3, per model; model-d hits a persistent 503 on one item.
    substantive = [i for i in ITEMS if i[7] is not None]
    for model in MODELS:
        for k, item in enumerate(substantive):
            marker = '"""\n' + item[7] + '\n"""'
            if model == "model-d" and k == 7:
                rules.append({"model": model, "contains": [marker], "error": {"kind": "transport", "status": 503}})
                continue
            rules.append({"model": model, "contains": [marker], "response": stage3_reply(model, k, item)})

    (OUT / "stub_script.json").write_text(json.dumps({"rules": rules}, indent=2) + "\n")

    config = {
        "corpus": "annotations.json",
        "reading": f"{READING_ID}.md",
        "reading_summary": f"{READING_ID}.summary.txt",
        "reading_prompts": f"{READING_ID}.prompts.txt",
        "stage1_prompt": "p2",
        "context_mode": "summary_instructor",
        "scheme": "p3",
        "models": MODELS,
        "backend": "stub",
        "stub_script": "stub_script.json",
        "parallelism": 4,
        "max_attempts": 3,
        "backoff_ms": 5,
        "seed": 7,
    }
    (OUT / "config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
