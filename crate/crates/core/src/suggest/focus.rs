//! Keyword tagging of chat turns with the section they discuss.

use crate::model::SectionId;

fn keywords(section: SectionId) -> &'static [&'static str] {
    match section {
        SectionId::ExecutiveSummary => &["summary", "overview", "elevator pitch"],
        SectionId::CompanyDescription => &["company", "history", "founded", "founding", "mission", "legal structure"],
        SectionId::MarketAnalysis => &["market", "competitor", "competition", "industry", "target customer"],
        SectionId::OrganizationManagement => &["organization", "management", "team", "staff", "employee", "hire", "hiring"],
        SectionId::ServiceProductLine => &["product", "service", "menu", "offering", "pricing"],
        SectionId::MarketingSales => &["marketing", "sales", "advertis", "social media", "promot", "customers find"],
        SectionId::FundingRequest => &["funding", "loan", "grant", "investor", "financing", "raise money"],
        SectionId::FinancialProjections => &["financial", "projection", "revenue", "profit", "cash flow", "forecast", "budget", "break even"],
        SectionId::Appendix => &["appendix", "permit", "license", "supporting document"],
    }
}

/// Byte offset of the first occurrence of `needle` that starts a word.
fn word_start_find(haystack: &str, needle: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(i) = haystack[from..].find(needle) {
        let at = from + i;
        let boundary = haystack[..at].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        if boundary {
            return Some(at);
        }
        from = at + needle.len();
    }
    None
}

fn earliest<'a>(text: &str, candidates: impl Iterator<Item = (SectionId, &'a str)>) -> Option<SectionId> {
    candidates
        .filter_map(|(s, needle)| word_start_find(text, needle).map(|at| (at, s)))
        .min()
        .map(|(_, s)| s)
}

/// Section named or implied by `text`, if any.
///
/// A section's display name (or its identifier with spaces) beats keyword
/// hits; within each pass the earliest mention wins.
pub fn tag_focus(text: &str) -> Option<SectionId> {
    let lower = text.to_lowercase();
    let names = SectionId::ALL.into_iter().flat_map(|s| {
        [s.display_name().to_lowercase(), s.as_str().replace('_', " "), s.as_str().to_string()]
            .into_iter()
            .map(move |n| (s, n))
    });
    let names: Vec<(SectionId, String)> = names.collect();
    earliest(&lower, names.iter().map(|(s, n)| (*s, n.as_str()))).or_else(|| {
        earliest(&lower, SectionId::ALL.into_iter().flat_map(|s| keywords(s).iter().map(move |k| (s, *k))))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_beat_keywords() {
        assert_eq!(tag_focus("fix the founding year in my executive summary"), Some(SectionId::ExecutiveSummary));
        assert_eq!(tag_focus("Improve the Market Analysis please"), Some(SectionId::MarketAnalysis));
        assert_eq!(tag_focus("see market_analysis"), Some(SectionId::MarketAnalysis));
    }

    #[test]
    fn earliest_keyword_wins() {
        assert_eq!(tag_focus("How big a loan for our marketing push?"), Some(SectionId::FundingRequest));
        assert_eq!(tag_focus("Our competitors advertise a lot"), Some(SectionId::MarketAnalysis));
        assert_eq!(tag_focus("hello there"), None);
    }

    #[test]
    fn keywords_match_at_word_starts_only() {
        assert_eq!(tag_focus("supermarket"), None);
        assert_eq!(tag_focus("advertising"), Some(SectionId::MarketingSales));
    }
}
