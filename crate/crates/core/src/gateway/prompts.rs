//! The built-in prompt catalog.
//!
//! Every model interaction in the engine goes through one of these templates.
//! Template ids double as replay-fixture keys and ledger categories.

use std::collections::BTreeMap;

use super::template::{PromptTemplate, TemplateError};

pub const ROUGH_OUTLINE: &str = "rough_outline";
pub const DETAILED_OUTLINE: &str = "detailed_outline";
pub const GEN_STORY: &str = "gen_story";
/// Triple extraction when storing text into the knowledge graph.
pub const EXTRACT_TRIPLES: &str = "extract_triples";
/// Triple extraction on a query, used only to collect query entities.
pub const EXTRACT_QUERY: &str = "extract_query";
pub const RELEVANCE: &str = "relevance";
/// Pseudo template id under which embedding calls are traced.
pub const EMBED: &str = "embed";

pub fn describe_id(rule_id: u8) -> String {
    format!("describe_rule{rule_id}")
}

pub fn judge_id(rule_id: u8) -> String {
    format!("judge_rule{rule_id}")
}

const ROUGH_OUTLINE_BODY: &str = r#"Based on the given novel story writing theory delimited by, the given novel setting delimited by, the given character introduction delimited by, and the given novel outline delimited by, plan the storyline of an episodic lone story.
The storyline contains the same number of parts as the theory.
The storyline you plan needs to be labeled concerning the description of each chapter according to the storyline planning theory.

story writing theory:{theory}
Novel setting:{setting}
Character introduction:{character}
The general story:{outline}

The output should be a markdown code snippet formatted in the following schema, including the leading and trailing "```json" and "```":

```json
{
    "stage": string  // the stage label taken from the writing theory
    "outline": string  // the storyline planned for this stage
}
```

Separate the {stage count} json objects with commas.
Contain all the json objects into a list object.
Nothing but your storyline should be contained in the answer.
Your storyline:
"#;

const DETAILED_OUTLINE_BODY: &str = r#"Your task is to generate chapter outlines based on the given volume of the novel.
Below are some steps to help you complete the task:
1. Determine how many chapters the given volume can be expanded into. You can determine the amount of chapters based on the stage of the volume in the story. The more intermediate a stage is, the more it needs to be expanded into more chapters, but no more than 5 normally each volume expands into 2 or 3 chapters.
2. Based on the content of the volume, determine the content for an outline of each chapter. The outline between chapters is not repeated.
3. The generated chapter outline, should refer to the relevant historical information and the previous chapter outline to make the outline consistent with the previous text in description and plot development.

## Input
the current volume outline: {volume outline}
the stage of the volume: {stage}
the outline of the previous chapter: {last chapter}
the related background: {history}

## Output Format
Please follow the output format strictly to ensure the consistency of the generated detailed chapter outline.
Nothing but only the {chapter count} chapter outlines should be included in the output.
Following the format below:
{chapter format}

Your result:
"#;

const GEN_STORY_BODY: &str = r#"Your task is to write one chapter of a long-form story based on the given chapter outline and the related background.
The chapter should be consistent with the chapter outline and must not contradict the related background.
The content of the chapter should be detailed and vivid, including detailed plot development, psychological description, environmental description, etc.
## Input
the chapter outline:{outline}
the related background:{history}

## Output Format
Nothing but only the generated content, which is composed by a series of sentences, should be included in the output.
Strictly follow the format below:
- Story:
Your generated content:
"#;

const EXTRACT_BODY: &str = r#"Your task is summarizing in the form of triples according to the given text.

There is an example:
given text:
Lily lived in a quaint rural town, surrounded by lush greenery and rolling hills. Despite the tranquility of her surroundings, she often felt restless and yearned for adventure. One day, while exploring the dense jungle that lay beyond her town, Lily stumbled upon an ancient diary in her grandmother's attic. The pages were yellowed with age, and the ink had faded over time, but Lily could still make out the words written within.
output triples:
1.(Lily, lives in, quaint rural town)
2. (quaint rural town, characterized by, lush greenery)
3. (quaint rural town, characterized by, rolling hills)
4. (Lily, feels, restlessness)
5. (Lily, yearns for, adventure)
6. (dense jungle, located beyond, quaint rural town)
7. (Lily, discovers, ancient diary)
8. (ancient diary, found in, grandmother's attic)
9. (ancient diary, characterized by, yellowed pages)
10. (ancient diary, characterized by, faded ink)

For each sentence delimited by '.' in the given text, you should follow these steps to extract the triples:
step1:Find all the verbs without any modifiers in the sentence.
step2:Find the subject and object without any modifiers for each verb from the step 1.
If the subject or object of the verb is a pronoun like he, she, it, there, that, they, or those, replacing them with what they refer to by context.
If you still can not determine what the pronoun refers to, use someone to replace it.
Make sure every element in triple is clear when understood alone, that means there is no pronoun in triples.
For a subject or object modified by a clause, treat the clause as a new sentence and follow the previous steps to extract a new triple for it.
step3:Normalize the above results in triples which are in the form of (subject, verb, object) for each verb and number them by 1.,2.,3. and so on.
Make sure there are only 3 elements in each triple. More or less elements are not acceptable.
Make sure the triples are in the correct form which is the same as the given output example and the elements are clear and understandable.

The given text:{text}
Your result:
"#;

const RELEVANCE_BODY: &str = r#"Scoring the Degree of correlation between the given outline and the given knowledge using the scoring criteria described below.
Points are accumulated based on the satisfaction of each criterion:

- Add 1 point if the knowledge involves the semantically same or similar subject indicated in the partial outline or add 0 point if the given knowledge and outline do not satisfy this criterion. Attention : Helen Keller and Helen refer to the same subject
- Add 1 point if the knowledge involves the semantically same or similar object indicated in the partial outline or add 0 point if the given knowledge and outline do not satisfy this criterion.
- Add 1 point if the knowledge involves the semantically same or similar action indicated in the partial outline or add 0 point if the given knowledge and outline do not satisfy this criterion.Attention : eliminate and erase refers to the same action
- Add 1 point if the knowledge and outline refer to the semantically same or similar event or add 0 point if the given knowledge and outline do not satisfy this criterion.
- Add 1 point if the knowledge can be potentially used when writing cause it can add relevant details or important information for the given outline or add 0 point if the given knowledge and outline do not satisfy this criterion.
- The score is an integer that sums up all the points you give. So the range of scores is 1,2,3,4,5.

The given outline:{outline}
the given knowledge:{triplesentence}

Output Format
There are 3 parts in your generated output.
Please strictly follow the format to ensure the correct evaluation of the relevance.
Nothing but the following parts you make should be included in the output.
Part1 Score Results and their Reasons:
for criterion 1. My result is: add (0 or 1).Because:....
for criterion 2. My result is: add (0 or 1).Because:....
for criterion 3. My result is: add (0 or 1).Because:....
for criterion 4. My result is: add (0 or 1).Because:....
for criterion 5. My result is: add (0 or 1).Because:....
Part2 Sum Up:
Summing up all the score results for each criterion:
eg.1+1+1+0+0=3
Part3 total score
Score:

Follow all the information above to generate the formatted output.
Do not contain any additional information except the output parts.
Your Output:
"#;

const QUADRUPLE_PREAMBLE: &str = r#"Generate a logical summary from the given input list.
The input list contains a series of quadruples, each containing the following elements:
The first element is the entity making the action.
The second element is the action.
The third element is the giving object of the action.
The fourth element is a number that represents the chapter in which the action took place.
"#;

const DESCRIBE_TAIL: &str = r#"
The list given:{inlist}
The output should express the information smoothly and match the accuracy of the input.
The output should be expressed in just one sentence.
Your results:
"#;

const DESCRIBE_RULE1: &str = r#"
The first two elements of the given series quadruple are the same, indicating that the sender of the action and the action are always the same. You should summarize the information from this perspective.

Here is a reference example:
Sample input: [("Bob", "hit", "Jane", 1), ("Bob", "hit", "Lily", 1), ("Bob", "hit", "Mary", 2)]
Example output: Bob hit Jane and Lily in Chapter 1 and then hit Mary in chapter 2.
"#;

const DESCRIBE_RULE2: &str = r#"
The first three elements of the given series quadruple are the same, indicating that the occurrence of actions remains the same in each chapter. You should summarize the information from this perspective.

Here are some reference examples:
Sample input: [("Bob", "hit", "Jane", 1), ("Bob", "hit", "Jane", 2), ("Bob", "hit", "Jane", 3)]
Example output: Bob hit Jane from chapter 1 to chapter 3.

Sample input: [("Bob", "hit", "Jane", 1), ("Bob", "hit", "Jane", 3)]
Example output: Bob hit Jane from chapter 1 and chapter 3.
"#;

const DESCRIBE_RULE3: &str = r#"
The second and third elements of the given quadruples are the same, indicating that the receiver of the action and the action are always the same. You should summarize the information from this perspective.
Here is an example:
input: [("Lily", "hit", "Jane", 1), ("Bob", "hit", "Jane", 1), ("Emma", "hit", "Jane", 3)]
Example output: Jane was hit by Lily and Bob in chapter 1 and she was hit by Emma in chapter 3.
"#;

const DESCRIBE_RULE4: &str = r#"
The first and third elements of the given quadruples are the same, indicating that the sender of some action and the receiver of some action are always the same. You should summarize the information from this perspective.
There are some examples:
input: [("Lily", "hate", "Jane", 2), ("Lily", "love", "Jane", 1)]
Example output: Lily loves Jane at chapter 1 but grows to hate Jane at chapter 2.
input: [("Lily", "kill", "Jane", 2), ("Lily", "hate", "Jane", 1)]
Example output: Lily hates Jane at chapter 1 and kills Jane at chapter 2.
"#;

const DESCRIBE_RULE5: &str = r#"Generate a logical summary from the given input list.
The input list contains a series of entities including their attributes and the chapter numbers in which they appear.
Here is a summary from a list of grouped quadruples:
input:[['small garden',1],['unfinished garden',3],['beautiful garden',2]]
Example output: the garden is small in chapter 1 and beautiful in chapter 2 but in chapter 3 ,it is unfinished.
"#;

const JUDGE_HEAD: &str = "Determine if the description given is reasonable.\n";

const JUDGE_TAIL: &str = r#"The input:{description}
The output should be a markdown code snippet formatted and the format is :
```json
{
        "result": string  Was a char chosen from 'Y' or 'N' that describes the judgment result. If the judgment result is 'Y', it means that the two schemas have conflicts. If the judgment result is 'N', it means that the two schemas do not have conflicts.
        "explanation": string Was a string that describes how you judge the conflict or conflict-free between the two schemas.
}
```
Please be strict in your judgment and consider the chronological order of the attributes.
Strictly judge based on the given information, do not add any information to make some unreasonable science into reasonable.
Your results:
"#;

const JUDGE_RULE1: &str = r#"The sender of the action and the main part of the action are always the same.
You need to determine whether the receivers of the action are reasonable as the knowledge described over Chapter identification.
You need to judge based on context of knowledge and Combined with the modified part of receivers to make the judgment.
"#;

const JUDGE_RULE2: &str = r#"The sender, the receiver of the action and the main part of the action itself are always the same but it happened at different chapters.
You need to determine whether the information in the knowledge can be maintained over Chapter identification in the knowledge.
You need to judge based on context of knowledge and your basic Semantic knowledge.
"#;

const JUDGE_RULE3: &str = r#"The receiver of the action and the main part of the action itself are always the same but the sender of the action is different.
You need to determine whether the senders of action are reasonable as the knowledge described over Chapter identification.
You need to judge based on context of knowledge and Combined with the modified part of senders to make the judgment.
"#;

const JUDGE_RULE4: &str = r#"The sender and the receiver of the action are always the same but the action may be different.
You need to determine whether the actions can co-exist as what the knowledge described over Chapter identification.
You need to judge based on the context of knowledge and Combine with the modified part of the action to make the judgment.
"#;

const JUDGE_RULE5: &str = "The description given is the change in the state of the same entity over time.\n";

/// A set of templates with unique ids.
#[derive(Debug, Clone, Default)]
pub struct PromptCatalog {
    templates: BTreeMap<String, PromptTemplate>,
}

impl PromptCatalog {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The full catalog used by the generation pipeline and the analyzer.
    pub fn builtin() -> Self {
        let mut catalog = Self::empty();
        let mut add = |id: &str, body: String| {
            catalog
                .insert(PromptTemplate::new(id, body))
                .expect("builtin template ids are unique");
        };
        add(ROUGH_OUTLINE, ROUGH_OUTLINE_BODY.to_string());
        add(DETAILED_OUTLINE, DETAILED_OUTLINE_BODY.to_string());
        add(GEN_STORY, GEN_STORY_BODY.to_string());
        add(EXTRACT_TRIPLES, EXTRACT_BODY.to_string());
        add(EXTRACT_QUERY, EXTRACT_BODY.to_string());
        add(RELEVANCE, RELEVANCE_BODY.to_string());

        let describe_rules = [DESCRIBE_RULE1, DESCRIBE_RULE2, DESCRIBE_RULE3, DESCRIBE_RULE4];
        for (i, rule) in describe_rules.iter().enumerate() {
            add(&describe_id(i as u8 + 1), format!("{QUADRUPLE_PREAMBLE}{rule}{DESCRIBE_TAIL}"));
        }
        add(&describe_id(5), format!("{DESCRIBE_RULE5}{DESCRIBE_TAIL}"));

        let judge_rules = [JUDGE_RULE1, JUDGE_RULE2, JUDGE_RULE3, JUDGE_RULE4, JUDGE_RULE5];
        for (i, rule) in judge_rules.iter().enumerate() {
            add(&judge_id(i as u8 + 1), format!("{JUDGE_HEAD}{rule}{JUDGE_TAIL}"));
        }
        catalog
    }

    pub fn insert(&mut self, template: PromptTemplate) -> Result<(), TemplateError> {
        if self.templates.contains_key(&template.template_id) {
            return Err(TemplateError::DuplicateId(template.template_id));
        }
        self.templates.insert(template.template_id.clone(), template);
        Ok(())
    }

    pub fn get(&self, template_id: &str) -> Option<&PromptTemplate> {
        self.templates.get(template_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::template::{bindings, placeholders};

    #[test]
    fn builtin_catalog_is_consistent() {
        let catalog = PromptCatalog::builtin();
        assert_eq!(catalog.ids().count(), 16);
        for id in catalog.ids() {
            let t = catalog.get(id).unwrap();
            let found: std::collections::BTreeSet<_> = placeholders(&t.body).into_iter().collect();
            assert_eq!(found, t.required_bindings, "{id}");
        }
        for rule in 1..=5 {
            assert_eq!(
                catalog.get(&describe_id(rule)).unwrap().required_bindings.len(),
                1
            );
            let judge = catalog.get(&judge_id(rule)).unwrap();
            assert!(judge.required_bindings.contains("description"));
            assert!(judge.body.contains("\"result\""));
        }
    }

    #[test]
    fn detailed_outline_binds_all_inputs_verbatim() {
        let catalog = PromptCatalog::builtin();
        let t = catalog.get(DETAILED_OUTLINE).unwrap();
        let b = bindings([
            ("volume outline", "Gabriel moves out of his parents' house."),
            ("stage", "Exposition"),
            ("last chapter", "None"),
            ("history", "Gabriel lives in small town in chapter 0"),
            ("chapter count", "three(3)"),
            ("chapter format", "- Chapter Outline 1:\n- Chapter Outline 2:\n- Chapter Outline 3:"),
        ]);
        let out = t.render(&b).unwrap();
        for v in b.values() {
            assert!(out.contains(v.as_str()), "missing {v}");
        }
        assert!(placeholders(&out).is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut c = PromptCatalog::empty();
        c.insert(PromptTemplate::new("a", "x")).unwrap();
        assert_eq!(
            c.insert(PromptTemplate::new("a", "y")),
            Err(TemplateError::DuplicateId("a".into()))
        );
    }
}
