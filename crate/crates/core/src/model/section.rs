use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the nine canonical business-plan sections.
///
/// The derived `Ord` follows declaration order, which is the canonical
/// document order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionId {
    ExecutiveSummary,
    CompanyDescription,
    MarketAnalysis,
    OrganizationManagement,
    ServiceProductLine,
    MarketingSales,
    FundingRequest,
    FinancialProjections,
    Appendix,
}

impl SectionId {
    pub const ALL: [SectionId; 9] = [
        SectionId::ExecutiveSummary,
        SectionId::CompanyDescription,
        SectionId::MarketAnalysis,
        SectionId::OrganizationManagement,
        SectionId::ServiceProductLine,
        SectionId::MarketingSales,
        SectionId::FundingRequest,
        SectionId::FinancialProjections,
        SectionId::Appendix,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionId::ExecutiveSummary => "executive_summary",
            SectionId::CompanyDescription => "company_description",
            SectionId::MarketAnalysis => "market_analysis",
            SectionId::OrganizationManagement => "organization_management",
            SectionId::ServiceProductLine => "service_product_line",
            SectionId::MarketingSales => "marketing_sales",
            SectionId::FundingRequest => "funding_request",
            SectionId::FinancialProjections => "financial_projections",
            SectionId::Appendix => "appendix",
        }
    }

    /// Heading text used by the export template.
    pub fn display_name(self) -> &'static str {
        match self {
            SectionId::ExecutiveSummary => "Executive Summary",
            SectionId::CompanyDescription => "Company Description",
            SectionId::MarketAnalysis => "Market Analysis",
            SectionId::OrganizationManagement => "Organization and Management",
            SectionId::ServiceProductLine => "Service or Product Line",
            SectionId::MarketingSales => "Marketing and Sales",
            SectionId::FundingRequest => "Funding Request",
            SectionId::FinancialProjections => "Financial Projections",
            SectionId::Appendix => "Appendix",
        }
    }

    /// Position in canonical order, 0-based.
    pub fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown section id `{0}`")]
pub struct UnknownSection(pub String);

impl FromStr for SectionId {
    type Err = UnknownSection;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SectionId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| UnknownSection(s.to_string()))
    }
}
