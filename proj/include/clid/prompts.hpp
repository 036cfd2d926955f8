#pragma once

// Prompt assets. Templates with published_verbatim=true reproduce the
// published agent prompts; the rest (NLI, faithfulness, weak filter,
// rerank, two-sided reports) are authored here and carry
// published_verbatim=false.

#include <vector>

#include "clid/llm.hpp"

namespace clid::prompts {

inline const PromptTemplate& fact_extraction_template() {
  static const PromptTemplate tpl{
      "fact_extraction",
      "1",
      R"(You are an expert fact extractor tasked with identifying and listing atomic facts from a given text. Your goal is to produce a comprehensive list of facts that are explicitly stated or directly inferrable from the provided information.

Instructions:
1. Read the title and text carefully.
2. Extract all atomic facts from the information provided. An atomic fact is a single, indivisible piece of information that cannot be broken down further without losing its meaning or accuracy.
3. Include only facts that are explicitly stated or can be directly and unambiguously inferred from the text.
4. Do not add any external knowledge or assumptions not present in the given information.
5. Ensure that each fact is self-contained and can be independently fact-checked.

Before providing your final list of facts, break down your fact extraction process in <fact_extraction_process> tags. This will help ensure a thorough and accurate extraction of facts.

In your fact extraction process, follow these steps:
1. Identify key topics or themes from the title and text.
2. For each topic/theme, list explicit facts from the text.
3. Consider potential inferences that can be directly drawn from the explicit facts, and evaluate their validity.
4. Evaluate each fact (explicit and inferred) for atomicity and self-containment.
5. Categorize facts by topic/theme.
6. Cross-reference each fact with the original text to ensure accuracy.
7. Review the list to ensure no redundant or overlapping facts are included.

After your analysis, provide your final list of facts, with each fact on a new line.

Example output structure:

<fact_extraction_process>
[Your detailed fact extraction process, following the steps outlined above]
</fact_extraction_process>

<facts>
[Fact 1]
[Fact 2]
[Fact 3]
...
</facts>)",
      {

      },
      R"(Here is the title and text you need to analyze:

<title>
{{ full_title }}
</title>

<text>
{{ text }}
</text>)",
      {"text", "full_title"},
      true};
  return tpl;
}

inline const PromptTemplate& explain_template() {
  static const PromptTemplate tpl{
      "explain",
      "1",
      R"(You will be given a topic, and a Wikipedia passage where the topic is mentioned. Your task is to write a self-contained paragraph explaining technical or domain-specific terms in the topic. Your goal is to provide background information on the given topic for people who are unfamiliar with it. If a term, event or concept in the topic has multiple interpretations or meanings, list all plausible ones.)",
      {
      {R"(Topic: Infanta Amalia
Wikipedia article: Infanta Amalia of Spain
Infanta Amalia of Spain (Spanish: Amalia de Borbon y Borbon-Dos Sicilias; 12 October 1834 - 27 August 1905) was the youngest daughter of Infante Francisco de Paula of Spain. Her eldest brother, Francisco de Asis, married Queen Isabella II of Spain, who was Amalia's first cousin.)",
       R"("Infanta Amalia" refers to a title and name in Spanish and Portuguese contexts. "Infanta" is a title used in Spain and Portugal for the daughters of a monarch who are not heir apparent, similar to "princess" in English. "Amalia" is a given name. Therefore, "Infanta Amalia" would refer to a princess named Amalia within a royal family in Spain or Portugal.)"},
      {R"(Topic: The Great Gatsby
Wikipedia article: The Great Gatsby
It was also performed in the summer of 2012 at the Aspen Music Festival and School. It was performed at Seagle Festival in Schroon Lake, NY in the summer of 2018.)",
       R"("The Great Gatsby" here likely to a musical adaptation, play, opera, or other performance based on the novel "The Great Gatsby" by F. Scott Fitzgerald. The novel is a classic work of American literature published in 1925. The performances mentioned in the passage are likely adaptations of the novel for the stage or other artistic mediums.)"}
      },
      R"(Topic: {{ topic }}
Wikipedia article: {{ full_title }}
{{ content }})",
      {"topic", "full_title", "content"},
      true};
  return tpl;
}

inline const PromptTemplate& clarify_template() {
  static const PromptTemplate tpl{
      "clarify",
      "1",
      R"(You will be given an entity and a Wikipedia paragraph where it is mentioned.
You will also be provided with a list of search results that may contain information about the entity, and other similar entities.
Your task is to write a self-contained paragraph explaining the differences between entities with similar names in the search results.
Entities with similar names might lead to confusion, and the goal here is to disambiguate them. Pay attention to the following:

- People with the same last name, but different first names. Or People with the same name but different professions or time periods.
- Events with the same name but different years or locations. For example, "The Olympics" could refer to the winter or summer games, or games held in different years.
- Organizations with similar names but different purposes or locations.
- etc.)",
      {
      {R"(Entity: members of the royal family of Spain named Amalia

[1] Title: Infanta Maria Amalia of Spain
Maria Amalia, Infanta of Spain (9 January 1779 in Madrid - 22 July 1798 in Madrid), was a Spanish princess. She was a daughter of King Charles IV of Spain, in 1795, she married her uncle Infante Antonio Pascual of Spain.

[2] Title: Infanta Amalia of Spain > Childhood
She was born at the royal Palace of Madrid on 12 October 1834 as the eleventh child and sixth daughter of Infante Francisco de Paula of Spain, younger brother of King Fernando VII of Spain, and his wife, Princess Luisa Carlota of Bourbon-Two Sicilies. Infanta Amalia's mother was the niece of her father since her maternal grandmother, Infanta Maria Isabella of Spain, was the elder sister of Infante Francisco de Paula.

[3] Title: Infanta Maria Amalia of Spain > Early life
Born at the Royal Palace of El Pardo, Maria Amalia was the second surviving daughter of King Carlos IV of Spain (1748-1819) and his wife Maria Luisa of Parma (1751-1819), a granddaughter of Louis XV of France.

[4] Title: Infanta Amalia of Spain
Infanta Amalia of Spain (Spanish: Amalia de Borbon y Borbon-Dos Sicilias; 12 October 1834 - 27 August 1905) was the youngest daughter of Infante Francisco de Paula of Spain. Her eldest brother, Francisco de Asis married Queen Isabella II of Spain, who was Amalia's first cousin. She was one of only two of five sisters who made a royal marriage. In 1865 she married Prince Adalbert of Bavaria, a son of King Ludwig I of Bavaria. Upon her marriage she moved to Munich, where she spent the rest of her life. However she remained attached to her native country and was instrumental in arranging the marriage of her eldest son Prince Ludwig Ferdinand of Bavaria with her niece Infanta Paz of Spain.

[5] Title: Infanta Amalia of Spain > Later life and death
Although Infanta Amalia lived for the rest of her life in Munich, she remained attached to her native country. She visited Spain often and her eldest son Prince Ludwig Ferdinand of Bavaria was born at the royal palace of Madrid. She spent the winters at the residence of Munich and the summers at Nymphenburg Palace. Her husband died in 1875; Amalia outlived him by thirty years. Amalia maintained her affiliation with Spain in the next generation. All of her five children spoke Spanish fluently and she encouraged her son Ludwig Ferdinand to marry her niece and goddaughter Infanta Maria de la Paz of Spain. The couple married in 1883.)",
       R"(There are two entities with similar names.
    1. "Infanta Amalia of Spain": Infanta Amalia of Spain (Spanish: Amalia de Borbon y Borbon-Dos Sicilias; 12 October 1834 - 27 August 1905) was the youngest daughter of Infante Francisco de Paula of Spain.
    2. "Infanta Maria Amalia of Spain": Maria Amalia, Infanta of Spain (9 January 1779 in Madrid - 22 July 1798 in Madrid), was a Spanish princess. She was a daughter of King Charles IV of Spain, in 1795, she married her uncle Infante Antonio Pascual of Spain.


These two individuals seem to be separate entities, but may be relatives.)"},
      {R"(Entity: Antoine Emile Henry Labeyrie

[1] Title: Antoine Emile Henry Labeyrie
Antoine Emile Henry Labeyrie (born 12 May 1943) is a French astronomer, who held the Observational astrophysics chair at the College de France between 1991 and 2014, where he is currently professor emeritus. He is working with the Hypertelescope Lise association, which aims to develop an extremely large astronomical interferometer with spherical geometry that might theoretically show features on Earth-like worlds around other suns, as its president. He is a member of the French Academy of Sciences in the Sciences of the Universe (sciences de l'univers) section. Between 1995 and 1999 he was director of the Haute-Provence Observatory.

[2] Title: Galluis > Notable residents
Antoine-Germain Labarraque (1777 - 1850) was a French chemist and pharmacist, notable for formulating and finding important uses for "Eau de Labarraque" or "Labarraque's solution", a solution of sodium hypochlorite widely used as a disinfectant and deodoriser. He died in Gallius on 9 December 1850.

[3] Title: Antoine Lavoisier
Antoine-Laurent de Lavoisier (26 August 1743 - 8 May 1794), also Antoine Lavoisier after the French Revolution, was a French nobleman and chemist who was central to the 18th-century chemical revolution and who had a large influence on both the history of chemistry and the history of biology.

[4] Title: Antoine Germain Labarraque
Antoine Germain Labarraque (28 March 1777 - 9 December 1850) was a French chemist and pharmacist, notable for formulating and finding important uses for "Eau de Labarraque" or "Labarraque's solution", a solution of sodium hypochlorite widely used as a disinfectant and deodoriser.

[5] Title: Antoine Germain Labarraque
| Antoine Germain Labarraque | |
| --- | --- |
| Portrait of Labarraque | |
| Born | (1777-03-28) Oloron-Sainte-Marie, Pyrenees-Atlantiques, France |
| Died | 9 December 1850 (1850-12-09) (aged 73)near Paris, France |
| Nationality | French |
| Education | College of Pharmacy, Paris |
| Occupation(s) | chemist and pharmacist |
| Known for | using sodium hypochlorite as a disinfectant and deodoriser |
| Parents | * Francois Labarraque (father) * Christine Sousbielle (mother) |)",
       R"(There are multiple notable French scientists with similar names beginning with "Antoine".
  1. Antoine Emile Henry Labeyrie (born 1943) is a French astronomer and professor emeritus who held the Observational astrophysics chair at the College de France.
  2. Antoine-Laurent de Lavoisier (1743-1794) was a French nobleman and chemist central to the 18th
  3. Antoine Germain Labarraque (1777-1850) was a French chemist and pharmacist known for developing "Labarraque's solution," a sodium hypochlorite disinfectant.
While these individuals share similar first names and French nationality, they worked in different fields and time periods.)"}
      },
      R"(Entity: {{ entity_name }}
Original article: {{ full_title }}
{{ content }}

{{ search_results }})",
      {"entity_name", "full_title", "content", "search_results"},
      true};
  return tpl;
}

inline const PromptTemplate& verifier_template() {
  static const PromptTemplate tpl{
      "verifier",
      "1",
      R"(Determine if a claim extracted from a Wikipedia paragraph is inconsistent with any of the provided documents. A claim is deemed inconsistent when at least one document contains information that directly contradicts it. If no such contradiction exists - even when the documents do not explicitly support the claim - the claim is considered consistent.

Step-by-Step Instructions:

1. Identify the Claim
Definition: A brief statement directly extracted from a Wikipedia paragraph.
Note: The full meaning of the claim might require context provided by the original paragraph.

2. Review the Documents
Definition: Passages, tables, or pieces of text retrieved from Wikipedia.
Task: Ignore documents that are clearly irrelevant to the claim.
Focus on finding any document that might contain information in clear conflict with the claim.

3. Consider Clarifications

Definition: Additional background information provided to clarify ambiguous terms or entities.
Task: Use clarifications to distinguish between similar or similarly named entities.
Important: Do not use clarifications to support or contradict the claim directly - they serve only to clear up ambiguities.

4. Assess for Inconsistencies

Definition of Inconsistency:
The claim is inconsistent if at least one document provides information that contradicts it.
Conversely, if no document provides conflicting information, the claim is considered consistent.
Measurement: Assign an inconsistency score between 0 (fully consistent) and 1 (completely inconsistent).
Intermediate scores indicate varying degrees of uncertainty or partial conflict.

5. Common Scenarios & Examples

Example 1: Clear Inconsistency

Claim: "The capital of Thailand is Bangkok."
Document: "The capital of Thailand is Phuket."
Reasoning: A country typically has one capital. The document contradicts the claim by listing a different city, yielding a high inconsistency score (e.g., 0.8-0.9).

Example 2: Apparent Inconsistency Resolved by Entity Equivalence (Minor Inconsistency)

Claim: "The capital of Thailand is Bangkok."
Document: "The capital of Thailand is Krung Thep Maha Nakhon."
Additional Background: It is widely accepted that Bangkok and Krung Thep Maha Nakhon refer to the same city.
Reasoning: Although the names differ, they reference the same location; thus, the claim is largely consistent (e.g., inconsistency score around 0.2-0.4).
Note: If an explicit clarification were provided stating the equivalence, the score would be 0.

Example 3: Misplaced Terms Causing Inconsistency

Claim: "The capital of Thailand is Bangkok."
Document: "The capital of Bangkok is Thailand."
Reasoning: The document seems to mix up entities by stating that Bangkok is a country. With no supporting evidence that this is a mere typo or misinterpretation, the conflict earns a high inconsistency score (e.g., around 0.9).

Example 4: Inconsistent Translational Variants

Claim: "The 'Song is Universal' won the Best Modern Rock Song award at the 2010 Korean Music Awards."
Document: "The Best Modern Rock Song award at the 2010 Korean Music Awards was given for 'Universal Song.'"
Additional Clarification: "Bangkok only refers to a city in Thailand, not elsewhere." (Not directly applicable here but shows how clarifications work.)
Reasoning: Although the song likely is the same, the differing English translations ("Song is Universal" vs. "Universal Song") introduce an inconsistency, resulting in a moderately high inconsistency score (e.g., around 0.8).

Example 5: No Conflict (Consistency)

Claim: "Stress is harmful to health, as mentioned in the medical literature."
Document: "Stress is necessary for growth and development, pushing limits, enhancing learning, and building resilience."
Reasoning: The document discusses the beneficial aspects of acute or eustress compared to chronic stress, which is what the claim addresses. Since these are two different perspectives on stress, there is no contradiction - the claim is consistent (inconsistency score 0).

Final Decision

After review, provide the inconsistency score for the claim:
0: Fully consistent; no document contradicts the claim.
Between 0 and 1: Partial or potential inconsistencies.
1: Fully inconsistent; at least one document directly contradicts the claim.)",
      {

      },
      R"(<claim>
Title: {{ full_title }}
{{ content }}

You should only focus on the aspect of this paragraph related to: "{{ claim_text }}"
</claim>

Read the following clarifications about the claim:
<clarifications>
{{ clarifications }}
</clarifications>

Now, read through the documents below and look for any information that conflicts with the claim:
<documents>
{{ documents }}
</documents>

Now, you need to analyze the documents and clarifications to determine an inconsistency score that represents your confidence that the claim is inconsistent with the documents.

First, rephrase the claim to be more specific by:
1. Incorporating context from the Wikipedia article title and content
2. Preserving the original meaning, but making corrections if the claim appears to be misrepresented or incorrectly paraphrased from the claim's context.

<claim_with_context>
[Provide the claim that incorporates the context from the Wikipedia article title and content here.]
</claim_with_context>

Based on the claim with context, present your full analysis and arguments:

<analysis>
[Provide a detailed analysis by:
1. Carefully examining the claim and documents for any contradictions or inconsistencies, look through examples above if there is concept similar to your case
2. Highlighting specific documents where information directly conflicts with the claim
3. Making sure that these documents are relevant to the claim. Some documents may contain the same entities as the claim, but they are not relevant to the claim, given the context
4. Exploring multiple interpretations of the claim's meaning and implications
5. Considering edge cases and ambiguities that could affect the analysis
6. Referencing relevant examples from above (translations, time-related issues, ordering) to strengthen your reasoning
7. Explaining your confidence level in identifying any inconsistencies found]

</analysis>

Based on your analysis, provide an inconsistency score from 0 to 1, where:
- 0 indicates the claim is completely consistent with all of the documents
- 1 indicates the claim is completely inconsistent with at least one of the documents
- Values between 0 and 1 represent varying degrees of uncertainty

<inconsistency_score>
[A single float from 0 to 1]
</inconsistency_score>)",
      {"full_title", "content", "claim_text", "clarifications", "documents"},
      true};
  return tpl;
}

inline const PromptTemplate& controller_template() {
  static const PromptTemplate tpl{
      "controller",
      "1",
      R"(You will be given a "claim" statement extracted from a Wikipedia paragraph.
Your task is to conduct a thorough investigation on the entire Wikipedia (except the article where the claim comes from) to find any factual inconsistencies with this claim.
As you conduct your investigation, you may come across articles that support the claim. However, you should continue searching for inconsistencies that might exist in other places. Inconsistencies might appear in subtle or indirect ways.

You will conduct your investigation in multiple steps. At each step, you should think about the information you have gathered so far, and choose one of the following actions based on it:

- `explain(topic: str) -> str`: Use this action to understand the basics of a specific term or concept you encounter, for example a technical term or the rules of a sport.

- `clarify_entity(entity_name_and_description: str) -> str`: Use this action to get a report on an entity (person, organization, event etc.) to clarify other entities with similar names. This will help you properly differentiate similar-sounding entities when researching inconsistencies. For example, clarify_entity("WW III wrestling event") will explain all potential events with similar names, or the same event in different years.

- `search_wikipedia_outside_claim_article(question: str) -> list`: Use this action to explore Wikipedia.

- `report_inconsistency(evidence: str)`: If at any point you are certain that you have found an inconsistency, use this action to report it. Evidence should be a short sentence that describes the inconsistency. Once you report an inconsistency, a human will review it and provide feedback.)",
      {

      },
      R"(Here is the claim to find inconsistencies with:
{{ claim_text }}

Here is more context about the claim for your reference:
Title: {{ full_title }}
{{ content }}

{{ action_history }}{{ format_reminder }})",
      {"claim_text", "full_title", "content", "action_history", "format_reminder"},
      true};
  return tpl;
}
inline const PromptTemplate& nli_template() {
  static const PromptTemplate tpl{
      "nli",
      "1",
      R"(You will be given a claim extracted from a Wikipedia paragraph and one passage retrieved from elsewhere in Wikipedia. Classify the relationship between the passage and the claim.

- SUPPORTS: the passage states information that confirms the claim.
- REFUTES: the passage states information that directly contradicts the claim.
- NOT_ENOUGH_INFO: the passage neither confirms nor contradicts the claim.

Use the claim's original paragraph only to understand what the claim means. Answer with exactly one label inside <label></label> tags.)",
      {},
      R"(<claim>
Title: {{ full_title }}
{{ content }}

Claim: "{{ claim_text }}"
</claim>

<passage>
{{ passage }}
</passage>)",
      {"full_title", "content", "claim_text", "passage"},
      false};
  return tpl;
}

inline const PromptTemplate& faithfulness_template() {
  static const PromptTemplate tpl{
      "faithfulness",
      "1",
      R"(You will be given a paragraph and a claim that was extracted from it. Decide whether the claim faithfully reflects the paragraph: every piece of information in the claim must be stated in, or directly and unambiguously inferable from, the paragraph. Answer yes or no inside <faithful></faithful> tags.)",
      {},
      R"(Title: {{ full_title }}
{{ content }}

Claim: "{{ claim_text }}")",
      {"full_title", "content", "claim_text"},
      false};
  return tpl;
}

inline const PromptTemplate& weak_filter_template() {
  static const PromptTemplate tpl{
      "weak_filter",
      "1",
      R"(Determine whether a claim extracted from a Wikipedia paragraph might be inconsistent with any of the provided documents. Be permissive: answer yes if any document plausibly contains information that conflicts with the claim, and no only if none of them could. Answer yes or no inside <decision></decision> tags.)",
      {},
      R"(<claim>
Title: {{ full_title }}
{{ content }}

You should only focus on the aspect of this paragraph related to: "{{ claim_text }}"
</claim>

<documents>
{{ documents }}
</documents>)",
      {"full_title", "content", "claim_text", "documents"},
      false};
  return tpl;
}

inline const PromptTemplate& rerank_template() {
  static const PromptTemplate tpl{
      "rerank",
      "1",
      R"(You will be given a search query and a numbered list of passages. Rank all passages by how relevant they are to the query, most relevant first. Output every passage number exactly once, comma-separated, inside <ranking></ranking> tags, for example <ranking>3, 1, 2</ranking>.)",
      {},
      R"(Query: {{ query }}

{{ passages }})",
      {"query", "passages"},
      false};
  return tpl;
}

inline const PromptTemplate& report_inconsistent_template() {
  static const PromptTemplate tpl{
      "report_inconsistent",
      "1",
      R"(You will be given a claim extracted from a Wikipedia paragraph, clarifications about ambiguous entities or terms, and documents retrieved from elsewhere in Wikipedia. Write the strongest honest argument that the claim is INCONSISTENT with the documents: cite the specific documents by number, quote the conflicting statements, and explain why they cannot both be true. Put the argument inside <argument></argument> tags.)",
      {},
      R"(<claim>
Title: {{ full_title }}
{{ content }}

Claim: "{{ claim_text }}"
</claim>

<clarifications>
{{ clarifications }}
</clarifications>

<documents>
{{ documents }}
</documents>)",
      {"full_title", "content", "claim_text", "clarifications", "documents"},
      false};
  return tpl;
}

inline const PromptTemplate& report_consistent_template() {
  static const PromptTemplate tpl{
      "report_consistent",
      "1",
      R"(You will be given a claim extracted from a Wikipedia paragraph, clarifications about ambiguous entities or terms, and documents retrieved from elsewhere in Wikipedia. Write the strongest honest argument that the claim is CONSISTENT with the documents: explain how apparent conflicts can be reconciled (different entities, time periods, rounding, translations, definitions) and cite the documents by number. Put the argument inside <argument></argument> tags.)",
      {},
      R"(<claim>
Title: {{ full_title }}
{{ content }}

Claim: "{{ claim_text }}"
</claim>

<clarifications>
{{ clarifications }}
</clarifications>

<documents>
{{ documents }}
</documents>)",
      {"full_title", "content", "claim_text", "clarifications", "documents"},
      false};
  return tpl;
}

/// Appended to the controller input when its previous output named no action.
inline constexpr const char* kControllerFormatReminder = R"(

Your previous response did not contain a recognizable action. Think briefly, then write exactly one action call on its own line, for example:
search_wikipedia_outside_claim_article("birth date of Infanta Amalia of Spain"))";

inline std::vector<const PromptTemplate*> all_templates() {
  return {&fact_extraction_template(), &explain_template(),          &clarify_template(),
          &verifier_template(),        &controller_template(),       &nli_template(),
          &faithfulness_template(),    &weak_filter_template(),      &rerank_template(),
          &report_inconsistent_template(), &report_consistent_template()};
}

}  // namespace clid::prompts
