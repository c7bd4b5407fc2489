// Generated by tools/embed_templates.py from templates/*.txt. Do not edit.
#pragma once

#include <string_view>

namespace glider::detail {

inline constexpr std::string_view k_judge_template = R"glider(Analyze the following pass criteria carefully and score the text based on the rubric defined below.
To perform this evaluation, you must:
1. Understand the text tags, pass criteria and rubric thoroughly.
2. Review the finer details of the text and the rubric.
3. Compare the tags to be evaluated to the score descriptions in the rubric.
4. Pay close attention to small details that might impact the final score and form accurate associations between tags and pass criteria.
5. Write a detailed reasoning justifying your evaluation in a bullet point format. 
6. The reasoning must summarize the overall strengths and weaknesses of the output while quoting exact phrases from the output wherever required.
7. Output a list of words or phrases that you believe are the most important in determining the score.
8. Assign a final score based on the scoring rubric.

Data to evaluate:
{user_input}

Pass Criteria:
{pass_criteria}

Rubric:
{rubric}

Your output must in the following format:
<reasoning>
[Detailed reasoning justifying your evaluation in a bullet point format according to the specifics defined above]
</reasoning>
<highlight>
[List of words or phrases that you believe are the most important in determining the score]
</highlight>
<score>
[The final integer score assigned based on the scoring rubric]
</score>)glider";

inline constexpr std::string_view k_gen_system_template = R"glider(You are an experienced scorer that can understand, rank and generate human criteria based on their rubrics. You will only output exactly what is asked and nothing else. Do not output introductions, salutations, comments etc and follow the instructions accurately. Do not refuse to generate long outputs and generate as much as you can. Strictly do not output markdown anywhere in your output. Close all tags properly and ensure that the output is in the correct format.)glider";

inline constexpr std::string_view k_gen_pointwise_template = R"glider(Create one data point for training an evaluation model in the domain "{domain}".

Metric to evaluate:
{metrics}

Instructions:
1. Write the data to be evaluated using exactly these tags in this order: {tag_list}. Forcing associations between these tags is intended, so use them as given even if the combination is unusual.
2. The data must contain approximately {word_count} words in total. {content_kind}
3. Write pass criteria that ask whether the data satisfies the metric above.{multimetric_instruction}
4. Write a rubric on the {scale_name} scale with exactly one line per score in the form "score: description", using only the scores {score_keys}.
5. Act as a human annotator. Output a correct score with a reasoning that justifies it, and an incorrect score with a reasoning that a careless annotator might give. The reasonings must be written in bullet point format, one bullet per line starting with "- ".
6. The correct and incorrect scores must be different integers taken from the rubric.

Your output must be in the following format:
<data>
{data_skeleton}
</data>
<pass_criteria>
[Pass criteria for the data]
</pass_criteria>
<rubric>
[One line per score in the form "score: description"]
</rubric>
<correct_reasoning>
[Bullet point reasoning for the correct score]
</correct_reasoning>
<correct_score>
[The correct integer score]
</correct_score>
<incorrect_reasoning>
[Bullet point reasoning for the incorrect score]
</incorrect_reasoning>
<incorrect_score>
[The incorrect integer score]
</incorrect_score>)glider";

inline constexpr std::string_view k_gen_pairwise_template = R"glider(Create one pairwise preference data point for training an evaluation model in the domain "{domain}".

Metric to evaluate:
{metrics}

Instructions:
1. Write the shared input using exactly these tags in this order: {tag_list}.
2. Write two responses to the input that differ in terms of quality according to the metric above. The better response must clearly satisfy the metric and the worse response must fall short of it. Together the data must contain approximately {word_count} words. {content_kind}
3. Write pass criteria that ask which response better satisfies the metric above.{multimetric_instruction}
4. Act as a human annotator. Write a correct reasoning explaining why the better response is preferred, and an incorrect reasoning that wrongly prefers the worse response. Refer to the responses only as BETTER_RESPONSE and WORSE_RESPONSE. The reasonings must be written in bullet point format, one bullet per line starting with "- ".

Your output must be in the following format:
<data>
{data_skeleton}
</data>
<better_response>
[The higher quality response]
</better_response>
<worse_response>
[The lower quality response]
</worse_response>
<pass_criteria>
[Pass criteria comparing the two responses]
</pass_criteria>
<correct_reasoning>
[Bullet point reasoning preferring BETTER_RESPONSE]
</correct_reasoning>
<incorrect_reasoning>
[Bullet point reasoning preferring WORSE_RESPONSE]
</incorrect_reasoning>)glider";

inline constexpr std::string_view k_verify_template = R"glider(You are an experienced data curator and verifier. You check training data for an evaluation model and answer directly and accurately.

Data:
{data}

Pass Criteria:
{pass_criteria}

Rubric:
{rubric}

Candidate 1 is expected to be correct.
Score: {chosen_score}
Reasoning:
{chosen_reasoning}

Candidate 2 is expected to be incorrect.
Score: {rejected_score}
Reasoning:
{rejected_reasoning}

Verify each field. A field is VALID when it behaves as expected: candidate 1 fields must be correct for the data, pass criteria and rubric, and candidate 2 fields must be incorrect for them. Otherwise the field is INVALID.

Your output must contain exactly these four lines and nothing else:
chosen_score: VALID or INVALID
chosen_reasoning: VALID or INVALID
rejected_score: VALID or INVALID
rejected_reasoning: VALID or INVALID)glider";

inline constexpr std::string_view k_highlight_template = R"glider(A highlight span is a word or phrase from the evaluated text that most influences the score given below. List the highlight spans for this evaluation. Every span must be copied exactly from the data, including punctuation and capitalization. Do not take spans from the pass criteria, the rubric or these instructions.

Data:
{data}

Pass Criteria:
{pass_criteria}

Rubric:
{rubric}

Score: {score}
Reasoning:
{reasoning}

Your output must be in the following format:
<highlight>
[List of words or phrases from the data, for example ['first phrase', 'second phrase']]
</highlight>)glider";

}  // namespace glider::detail
