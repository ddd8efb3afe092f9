#include "templates.hpp"

// Generated from prompts/*.txt; the golden-file test keeps the two in sync.

namespace clinqa::prompting::detail {

namespace {

constexpr std::string_view k_radqa_question_gen_direct_instruction = R"PROMPT(<radiology_report>
{{input_context}}
</radiology_report>

Considering the radiology report provided above, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination, formatted in an indexed list like "1. ... ".)PROMPT";

constexpr std::string_view k_radqa_question_gen_question_prefix = R"PROMPT(<radiology_report>
{{input_context}}
</radiology_report>

Considering the radiology report provided above, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination. Please make sure each question starts with a different prefix, such as "is," "does," "has," "which," "what," "how," and "where", formatted in an indexed list like "1. ... ".)PROMPT";

constexpr std::string_view k_radqa_question_gen_no_overlap = R"PROMPT(<radiology_report>
{{input_context}}
</radiology_report>

Considering the radiology report provided above, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination, formatted in an indexed list like "1. ... ". Make sure that the generated questions do not contain any words from the radiology report.)PROMPT";

constexpr std::string_view k_radqa_question_gen_sum_direct = R"PROMPT(<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination. Ensure the questions are diverse, covering various relevant aspects of the patient data. The generated questions should be formatted in an indexed list like "1. ... ".)PROMPT";

constexpr std::string_view k_radqa_question_gen_sum_no_overlap = R"PROMPT(<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination. Ensure the questions are diverse, covering various relevant aspects of the patient data. The generated questions should be formatted in an indexed list like "1. ... ". Make sure that the generated questions do not contain any words from the patient data.)PROMPT";

constexpr std::string_view k_radqa_question_gen_sum_question_prefix = R"PROMPT(<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided, generate {{question_num}} questions from a medical professional's viewpoint that they would seek to address through a radiological examination. Ensure the questions are diverse, covering various relevant aspects of the patient data. Please make sure questions start with different prefixes, such as "is," "does," "has," "which," "what," "how," and "where", formatted in an indexed list like "1. ... ".)PROMPT";

constexpr std::string_view k_radqa_summarization_full = R"PROMPT(<radiology_report>
{{input_context}}
</radiology_report>

Output JSON Template:
{
  "symptoms": ["xx"],
  "medical_conditions": ["xx"],
  "areas_examined": ["xx"],
  "patient_medical_history": ["xx"],
  "diagnostic_techniques": ["xx"],
}

Please generate a summary for the radiology report above to cover 5 following aspects: "symptoms", "medical_conditions", "areas_examined", "patient_medical_history", and "diagnostic_techniques", following the JSON template. If there is no information found for an aspect, then just output an empty list [] as the value in the JSON output.)PROMPT";

constexpr std::string_view k_radqa_summarization_incomplete = R"PROMPT(<radiology_report>
{{input_context}}
</radiology_report>

Output JSON Template:
{
  "symptoms": ["xx"],
  "medical_conditions": ["xx"],
  "patient_medical_history": ["xx"],
}

Please generate a summary for the radiology report above to cover 3 following aspects: "symptoms", "medical_conditions", and "patient_medical_history", following the JSON template. If there is no information found for an aspect, then just output an empty list [] as the value in the JSON output.)PROMPT";

constexpr std::string_view k_radqa_summarization_none = R"PROMPT(<radiology_report>
{{input_context}}
</radiology_report>

Please generate a simple one-paragraph summary for the radiology report above.)PROMPT";

constexpr std::string_view k_radqa_answer_distill = R"PROMPT(<radiology_report>
{{input_context}}
</radiology_report>

Please address the question below by referencing the specific details provided in the preceding report. Employ an extractive question-answering approach: provide only a quotation from the report as the answer, wrapped by quotation marks, and ensure these quotes are as concise as possible to accurately fulfill the query. Make every effort to find the answer in the report, considering all possible details. If, after thorough consideration, the question genuinely cannot be answered with the information provided, respond with "Unanswerable". Always aim to find a relevant and accurate answer. The output should be formatted as "Q: ... <newline>A: ... <newline><newline>Q: ...".

{{input_questions}})PROMPT";

constexpr std::string_view k_mimicqa_question_gen_direct_instruction = R"PROMPT(<clinical_record>
{{input_context}}
</clinical_record>

Considering the clinical record provided above, generate {{question_num}} questions from a medical professional's viewpoint, formatted in an indexed list like "1. ... <newline>2. ...".)PROMPT";

constexpr std::string_view k_mimicqa_question_gen_question_prefix = R"PROMPT(<clinical_record>
{{input_context}}
</clinical_record>

Considering the clinical record provided above, generate {{question_num}} questions from a medical professional's viewpoint. Please make sure each question starts with a different prefix, such as "is," "does," "has," "which," "what," "how," and "where", formatted in an indexed list like "1. ... ".)PROMPT";

constexpr std::string_view k_mimicqa_question_gen_no_overlap = R"PROMPT(<clinical_record>
{{input_context}}
</clinical_record>

Considering the clinical record provided above, generate {{question_num}} questions from a medical professional's viewpoint, formatted in an indexed list like "1. ... <newline>2. ...". Make sure that the generated questions do not contain any words from the clinical record.)PROMPT";

constexpr std::string_view k_mimicqa_question_gen_sum_direct = R"PROMPT(<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided above, generate {{question_num}} questions from a medical professional's viewpoint. Ensure the questions are diverse, covering various relevant aspects of the patient data, formatted in an indexed list like "1. ... ".)PROMPT";

constexpr std::string_view k_mimicqa_question_gen_sum_no_overlap = R"PROMPT(<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided above, generate {{question_num}} questions from a medical professional's viewpoint. Ensure the questions are diverse, covering various relevant aspects of the patient data, formatted in an indexed list like "1. ... ". Make sure that the generated questions do not contain any words from the patient data.)PROMPT";

constexpr std::string_view k_mimicqa_question_gen_sum_question_prefix = R"PROMPT(<patient_data>
{{input_summary}}
</patient_data>

Considering the patient data provided above, generate {{question_num}} questions from a medical professional's viewpoint. Ensure the questions are diverse, covering various relevant aspects of the patient data. Please make sure questions start with different prefixes, such as "is," "does," "has," "which," "what," "how," and "where", formatted in an indexed list like "1. ... ".)PROMPT";

constexpr std::string_view k_mimicqa_summarization_full = R"PROMPT(<clinical_record>
{{input_context}}
</clinical_record>

Output JSON Template:
{
    "patient_history": ["value1", "value2", ..., "value5"],
    "diagnosis": ["value1", "value2", ..., "value5"],
    "symptoms": ["value1", "value2", ..., "value5"],
    "medical_conditions": ["value1", "value2", ..., "value5"],
    "exam_results": ["value1", "value2", ..., "value5"],
}

Please generate a structured summary for the clinical record above to cover 5 following aspects: "patient_history", "diagnosis", "symptoms", "medical_conditions", and "exam_results", following the JSON template. Identify five values for each aspect at most. If there is no information found for an aspect, then just output an empty list [] as the value in the JSON output.)PROMPT";

constexpr std::string_view k_mimicqa_summarization_none = R"PROMPT(<clinical_record>
{{input_context}}
</clinical_record>

Please generate a simple one-paragraph summary for the clinical record above.)PROMPT";

constexpr std::string_view k_mimicqa_answer_distill = R"PROMPT(<clinical_record>
{{input_context}}
</clinical_record>

Please address the questions below by referencing the specific details provided in the preceding clinical record. Employ an extractive question-answering approach: provide only a quotation from the record as the answer, wrapped by quotation marks. The answer should always be taken from the clinical record and can range from a few words to one or two sentences. For questions beginning with phrases like "does the patient have," "is the patient," etc., ensure the answer is a direct quote from the record rather than a simple yes or no. If, after thorough consideration, the question genuinely cannot be answered with the information provided, respond with "Unanswerable". The output should be formatted as "Q: ... <newline>A: ... <newline><newline>Q: ...".

{{input_questions}})PROMPT";

}  // namespace

const std::vector<PromptTemplate>& builtin_templates() {
  static const std::vector<PromptTemplate> templates{
    {"radqa/question_gen.direct_instruction", Dataset::radqa, Stage::question_gen, Strategy::direct_instruction, std::nullopt, k_radqa_question_gen_direct_instruction, false},
    {"radqa/question_gen.question_prefix", Dataset::radqa, Stage::question_gen, Strategy::question_prefix, std::nullopt, k_radqa_question_gen_question_prefix, false},
    {"radqa/question_gen.no_overlap", Dataset::radqa, Stage::question_gen, Strategy::no_overlap, std::nullopt, k_radqa_question_gen_no_overlap, false},
    {"radqa/question_gen.sum_direct", Dataset::radqa, Stage::question_gen, Strategy::sum_direct, std::nullopt, k_radqa_question_gen_sum_direct, true},
    {"radqa/question_gen.sum_no_overlap", Dataset::radqa, Stage::question_gen, Strategy::sum_no_overlap, std::nullopt, k_radqa_question_gen_sum_no_overlap, false},
    {"radqa/question_gen.sum_question_prefix", Dataset::radqa, Stage::question_gen, Strategy::sum_question_prefix, std::nullopt, k_radqa_question_gen_sum_question_prefix, true},
    {"radqa/summarization.full", Dataset::radqa, Stage::summarization, std::nullopt, SchemaVariant::full, k_radqa_summarization_full, false},
    {"radqa/summarization.incomplete", Dataset::radqa, Stage::summarization, std::nullopt, SchemaVariant::incomplete, k_radqa_summarization_incomplete, true},
    {"radqa/summarization.none", Dataset::radqa, Stage::summarization, std::nullopt, SchemaVariant::none, k_radqa_summarization_none, true},
    {"radqa/answer_distill", Dataset::radqa, Stage::answer_distill, std::nullopt, std::nullopt, k_radqa_answer_distill, false},
    {"mimicqa/question_gen.direct_instruction", Dataset::mimicqa, Stage::question_gen, Strategy::direct_instruction, std::nullopt, k_mimicqa_question_gen_direct_instruction, false},
    {"mimicqa/question_gen.question_prefix", Dataset::mimicqa, Stage::question_gen, Strategy::question_prefix, std::nullopt, k_mimicqa_question_gen_question_prefix, false},
    {"mimicqa/question_gen.no_overlap", Dataset::mimicqa, Stage::question_gen, Strategy::no_overlap, std::nullopt, k_mimicqa_question_gen_no_overlap, false},
    {"mimicqa/question_gen.sum_direct", Dataset::mimicqa, Stage::question_gen, Strategy::sum_direct, std::nullopt, k_mimicqa_question_gen_sum_direct, true},
    {"mimicqa/question_gen.sum_no_overlap", Dataset::mimicqa, Stage::question_gen, Strategy::sum_no_overlap, std::nullopt, k_mimicqa_question_gen_sum_no_overlap, true},
    {"mimicqa/question_gen.sum_question_prefix", Dataset::mimicqa, Stage::question_gen, Strategy::sum_question_prefix, std::nullopt, k_mimicqa_question_gen_sum_question_prefix, false},
    {"mimicqa/summarization.full", Dataset::mimicqa, Stage::summarization, std::nullopt, SchemaVariant::full, k_mimicqa_summarization_full, false},
    {"mimicqa/summarization.none", Dataset::mimicqa, Stage::summarization, std::nullopt, SchemaVariant::none, k_mimicqa_summarization_none, true},
    {"mimicqa/answer_distill", Dataset::mimicqa, Stage::answer_distill, std::nullopt, std::nullopt, k_mimicqa_answer_distill, false},
  };
  return templates;
}

}  // namespace clinqa::prompting::detail
