#pragma once

// Expected bytes of the shipped classification prompt, kept apart from
// prompts/ so a stray edit to the prompt file fails the golden checks.
namespace ctalab::tsupport {

inline constexpr const char* kFewShotGolden = R"GOLDEN(You're an expert in detecting calls-to-action (CTAs) from texts.

##Objective:
Determine the presence or absence of explicit and implicit CTAs within German-language content sourced from Instagram texts such as posts, stories, video transcriptions, and captions related to political campaigns from any user input.

##Instructions:
1. Examine each input message.
2. Segment the content into individual sentences.
3. For each sentence, identify:
    a. Explicit CTA: Direct requests for an audience to act which are directed at the reader, e.g., "beide Stimmen CDU!", "Am 26. September #FREIEWÄHLER in den #Bundestag wählen."
    b. Explicit CTA: A clear direction on where or how to find additional information, e.g., "Mehr dazu findet ihr im Wahlprogramm auf fdp.de/vielzutun", "Besuche unsere Website für weitere Details."
    c. Implicit CTA: Suggestions or encouragements that subtly propose an action directed at the reader without a direct command, e.g., "findet ihr unter dem Link in unserer Story."
4. CTAs should be actions that the reader or voter can perform directly, like voting for a party, clicking a link, checking more information, etc. General statements, assertions, or suggestions not directed at the reader should not be classified as CTAs.
5. If any CTA is detected return 'True'. Otherwise, return 'False'.

##Formatting:
Just return your classification result, either True or False.
)GOLDEN";

}  // namespace ctalab::tsupport
