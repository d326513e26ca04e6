//! The four prompt templates with their stored few-shot demonstrations.
//!
//! Slots are written `{name}`. Substitution is a single left-to-right pass,
//! so braces inside bound values are never re-expanded.

use std::collections::BTreeMap;

use super::TemplateId;
use crate::error::{Error, Result};

const KEYWORD_EXTRACTION: &str = r#"### First, find schema keywords and data content keywords in the given question. Then, for each keyword, try to identify the possible corresponding tables and columns using the value examples provided.

==========
Answer with one line per keyword: keyword | data or schema | table | column1, column2

### Sqlite SQL tables, with their table names, column names and data value examples:
# Table: singer
## Columns: Singer_ID INTEGER, Name TEXT, Country TEXT, Age INTEGER
## Samples (3):
(1, 'Joe Sharp', 'Netherlands', 52)
(2, 'Timbaland', 'United States', 32)
(3, 'Justin Brown', 'France', 29)
### Foreign keys of SQLite tables, used for table joins:
none
### Question:
How many singers from the US are older than 40?
### Answer:
singers | schema | singer | Singer_ID
the US | data | singer | Country, Name
older than 40 | schema | singer | Age

### Sqlite SQL tables, with their table names, column names and data value examples:
# Table: nationalecodata
## Columns: indexcode TEXT, indexname TEXT, roworder INTEGER, reportperiod TEXT, cumulative REAL
## Samples (3):
('C01', 'CPI(%)', 7, '2022-12-31', 2.0)
('R01', 'Retail sales growth', 9, '2022-09-30', 3.1)
('U01', 'Unemployment rate', 8, '2023-06-30', 5.2)
### Foreign keys of SQLite tables, used for table joins:
none
### Question:
What was the consumer price index in the fourth quarter of 2022?
### Answer:
consumer price index | data | nationalecodata | indexname, indexcode
the fourth quarter of 2022 | data | nationalecodata | reportperiod
value | schema | nationalecodata | cumulative

### Sqlite SQL tables, with their table names, column names and data value examples:
# Table: car_names
## Columns: MakeId INTEGER, Model TEXT, Make TEXT
## Samples (3):
(1, 'chevrolet', 'chevrolet chevelle malibu')
(2, 'buick', 'buick skylark 320')
(3, 'plymouth', 'plymouth satellite')
# Table: cars_data
## Columns: Id INTEGER, MPG TEXT, Cylinders INTEGER, Horsepower TEXT, Weight INTEGER, Year INTEGER
## Samples (2):
(1, '18', 8, '130', 3504, 1970)
(2, '15', 8, '165', 3693, 1970)
### Foreign keys of SQLite tables, used for table joins:
cars_data.Id = car_names.MakeId
### Question:
What is the weight of the Buick Skylark?
### Answer:
weight | schema | cars_data | Weight
the Buick Skylark | data | car_names | Make, Model

### Sqlite SQL tables, with their table names, column names and data value examples:
# Table: stadium
## Columns: Stadium_ID INTEGER, Name TEXT, Location TEXT, Capacity INTEGER
## Samples (2):
(1, 'Stark''s Park', 'Raith Rovers', 10104)
(2, 'Somerset Park', 'Ayr United', 11998)
### Foreign keys of SQLite tables, used for table joins:
none
### Question:
List the names of all stadiums.
### Answer:
names | schema | stadium | Name
stadiums | schema | stadium | Stadium_ID
==========

### Sqlite SQL tables, with their table names, column names and data value examples:
{desc_str}
### Foreign keys of SQLite tables, used for table joins:
{fk_str}
### Question:
{query}
### Answer:
"#;

const FUZZY_DETECTION: &str = r#"### Based on data samples extracted from the related columns, infer the possible storage values (up to 5) of the data content keyword in the database. Please provide them in the form of a list.

# data content keyword: the US.
# data samples for column Country: ['Netherlands', 'United States', 'France']
# possible storage values: ["United States", "USA", "US", "United States of America"]

# data content keyword: the fourth quarter of 2022.
# data samples for column reportperiod: ['2022-09-30', '2023-06-30']
# possible storage values: ["2022-12-31", "2022Q4", "2022-4"]

# data content keyword: consumer price index.
# data samples for column indexname: ['CPI(%)', 'Retail sales growth', 'Unemployment rate']
# possible storage values: ["CPI", "CPI(%)", "Consumer price index", "consumer price"]

# data content keyword: the Buick Skylark.
# data samples for column Make, Model: ['chevrolet chevelle malibu', 'buick', 'plymouth satellite']
# possible storage values: ["buick skylark", "buick skylark 320", "skylark"]

# data content keyword: Holland.
# data samples for column Country: ['France', 'United States']
# possible storage values: ["Netherlands", "The Netherlands", "Holland", "NL"]

# data content keyword: female.
# data samples for column Sex: ['M', 'M', 'F']
# possible storage values: ["F", "Female", "female"]

# data content keyword: New York City.
# data samples for column city: ['Boston', 'Chicago', 'NYC']
# possible storage values: ["NYC", "New York", "New York City"]

# data content keyword: dogs.
# data samples for column PetType: ['cat', 'cat', 'dog']
# possible storage values: ["dog", "Dog", "dogs"]

# data content keyword: retail sales.
# data samples for column indexname: ['Retail sales growth', 'CPI(%)']
# possible storage values: ["Retail sales growth", "Retail sales", "retail sales(%)"]

# data content keyword: {keyword}.
# data samples for column {column}: {datasamples}
# possible storage values: "#;

const SQL_GENERATION: &str = r#"### Refer to the provided table and encoding knowledge, follow the requirements, and use valid SQLite to answer the question.

### Requirements:
# In `SELECT <column>`, just select needed columns in the Question without any unnecessary column or value
# If the same column name appears in multiple tables, specify the table to which it belongs to avoid ambiguity.

==========
### Question:
How many singers from the US are older than 40?
### Encoding knowledge for SQL generation:
{"keyword": "the US", "database": "concert_singer", "table": "singer", "column": "Country", "value": "United States"}
### SQL:
SELECT count(*) FROM singer WHERE Country = 'United States' AND Age > 40

### Question:
What was the consumer price index in the fourth quarter of 2022?
### Encoding knowledge for SQL generation:
{"keyword": "consumer price index", "database": "econ", "table": "nationalecodata", "column": "roworder", "value": "7"}
{"keyword": "the fourth quarter of 2022", "database": "econ", "table": "nationalecodata", "column": "reportperiod", "value": "2022-12-31"}
### SQL:
SELECT cumulative FROM nationalecodata WHERE roworder = 7 AND reportperiod = '2022-12-31'

### Question:
What is the weight of the Buick Skylark?
### Encoding knowledge for SQL generation:
{"keyword": "the Buick Skylark", "database": "car_1", "table": "car_names", "column": "Make", "value": "buick skylark 320"}
### SQL:
SELECT T2.Weight FROM car_names AS T1 JOIN cars_data AS T2 ON T1.MakeId = T2.Id WHERE T1.Make = 'buick skylark 320'

### Question:
List the names of all stadiums.
### Encoding knowledge for SQL generation:
none
### SQL:
SELECT Name FROM stadium
==========

### Sqlite SQL tables, with their table names, column names and data value examples:
{desc_str}
### Foreign keys of SQLite tables, used for table joins:
{fk_str}
### Question:
{query}
###  Encoding knowledge for SQL generation:
{related_prompt}
### SQL:
SELECT "#;

const SQL_REVISION: &str = r#"### When executing SQL below, some errors occurred, please fix up SQL based on query and database info.
### Solve the task step by step if you need to. Using SQL format in the code block, and indicate script type in the code block.
### When you find an answer, verify the answer carefully.

### Notes & Examples:
# In `SELECT <column>`, just select needed columns in the Question without any unnecessary column or value
# Don't use `IN`, `OR`, `LEFT JOIN` as it might cause extra results, use `JOIN`, `INTERSECT`, `EXCEPT` instead
# Use `DISTINCT`, `DESC`, or `LIMIT` when necessary
# In `FROM <table>` or `JOIN <table>`, do not include unnecessary table
# In `JOIN <table>`, make sure the Foreign keys used in the SQL is correct

### Question:
{query}
### Encoding knowledge for SQL generation:
{related_prompt}
### Sqlite SQL tables, with their table names, column names and data value examples:
{desc_str}
### Foreign keys of SQLite tables, used for table joins:
{fk_str}
### Old SQL:
{old_sql}
### SQLite error:
{sqlite_error}
### Exception class:
{exception_class}

### Now please fixup old SQL and generate new SQL only and with no explanation.
### correct SQL:
"#;

pub fn template_text(id: TemplateId) -> &'static str {
    match id {
        TemplateId::KeywordExtraction => KEYWORD_EXTRACTION,
        TemplateId::FuzzyDetection => FUZZY_DETECTION,
        TemplateId::SqlGeneration => SQL_GENERATION,
        TemplateId::SqlRevision => SQL_REVISION,
    }
}

enum Piece<'a> {
    Literal(&'a str),
    Slot(&'a str),
}

fn pieces(text: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after.find('}');
        let name = close.map(|c| &after[..c]);
        match name {
            Some(n) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') => {
                out.push(Piece::Literal(&rest[..open]));
                out.push(Piece::Slot(n));
                rest = &after[n.len() + 1..];
            }
            _ => {
                out.push(Piece::Literal(&rest[..=open]));
                rest = after;
            }
        }
    }
    out.push(Piece::Literal(rest));
    out
}

/// Slot names of a template in order of first appearance.
pub fn template_slots(id: TemplateId) -> Vec<&'static str> {
    let mut slots = Vec::new();
    for piece in pieces(template_text(id)) {
        if let Piece::Slot(name) = piece {
            if !slots.contains(&name) {
                slots.push(name);
            }
        }
    }
    slots
}

pub fn render_template(id: TemplateId, bindings: &BTreeMap<String, String>) -> Result<String> {
    let slots = template_slots(id);
    if let Some(missing) = slots.iter().find(|s| !bindings.contains_key(**s)) {
        return Err(Error::UnboundSlot(missing.to_string()));
    }
    if let Some(extra) = bindings.keys().find(|k| !slots.contains(&k.as_str())) {
        return Err(Error::UnknownSlot(extra.clone()));
    }
    let mut out = String::new();
    for piece in pieces(template_text(id)) {
        match piece {
            Piece::Literal(text) => out.push_str(text),
            Piece::Slot(name) => out.push_str(&bindings[name]),
        }
    }
    Ok(out)
}
