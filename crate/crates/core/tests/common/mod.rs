#![allow(dead_code)]

pub mod oracles;

pub const FIXTURE_T1: &str = "\
customer_id,order_date,revenue,cost,volume_tons,product_group,region
C1,2024-01-01,100,60,10,steel,north
C2,2024-02-15,50,40,5,steel,south
C3,2024-01-10,10,5,1,alloy,north
C1,2024-03-01,200,120,20,alloy,north
C3,2024-02-10,10,5,1,alloy,north
C3,2024-03-10,10,5,1,alloy,north
";
